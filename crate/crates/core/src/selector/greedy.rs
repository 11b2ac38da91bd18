use serde::{Deserialize, Serialize};

use super::{feasible_candidates, RegionSequence};
use crate::submodular::{Components, Region, SequenceObjective};
use crate::{Error, Result};

/// Instrumentation of one selection run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStats {
    /// Calls of the full marginal-gain evaluation against the current state.
    pub gain_evaluations: usize,
}

/// Result of a greedy run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub sequence: RegionSequence,
    /// `R` of the full sequence.
    pub value: f64,
    pub stats: SelectionStats,
}

/// Frame-by-frame greedy: at every frame evaluates every feasible candidate
/// and keeps the one with maximal marginal gain (lowest index on ties).
pub fn greedy_select(objective: &SequenceObjective, existing: &[Vec<f64>]) -> Result<Selection> {
    let grid = objective.grid();
    let mut state = objective.empty_state(existing.to_vec())?;
    let mut stats = SelectionStats::default();
    for t in 0..objective.frames() {
        let mut best: Option<(usize, f64)> = None;
        for cell in feasible_candidates(grid, state.sequence().last().copied())? {
            let gain = objective.marginal_gain(&state, Region::new(t, cell))?;
            stats.gain_evaluations += 1;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((cell, gain));
            }
        }
        let (cell, _) = best.ok_or_else(|| Error::Internal(format!("no feasible region at frame {t}")))?;
        objective.commit(&mut state, Region::new(t, cell))?;
    }
    let cells = state.sequence().to_vec();
    let value = objective.evaluate_value(&cells, existing)?;
    Ok(Selection {
        sequence: RegionSequence::new(grid, cells)?,
        value,
        stats,
    })
}

/// Per-region selection costs for the cost-benefit pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    #[default]
    Unit,
    /// One positive cost per grid cell, shared by all frames.
    PerRegion(Vec<f64>),
}

impl CostModel {
    pub fn validate(&self, regions: usize) -> Result<()> {
        if let CostModel::PerRegion(costs) = self {
            if costs.len() != regions {
                return Err(Error::CostModel(format!(
                    "{} costs for {regions} regions",
                    costs.len()
                )));
            }
            if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
                return Err(Error::CostModel(format!("cost {c} is not positive")));
            }
        }
        Ok(())
    }

    pub fn cost(&self, region: usize) -> f64 {
        match self {
            CostModel::Unit => 1.0,
            CostModel::PerRegion(costs) => costs[region],
        }
    }

    /// All regions cost the same, so the cost-benefit pass repeats the uniform one.
    pub fn is_uniform(&self) -> bool {
        match self {
            CostModel::Unit => true,
            CostModel::PerRegion(costs) => costs.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

/// The two lazy-forward passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LazyPass {
    UniformCost,
    CostBenefit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CelfSelection {
    pub sequence: RegionSequence,
    pub value: f64,
    /// Pass whose sequence was returned.
    pub pass: LazyPass,
    /// Counts summed over the passes that ran.
    pub stats: SelectionStats,
}

struct LazyEntry {
    cell: usize,
    key: f64,
    fresh: bool,
}

fn lazy_forward(
    objective: &SequenceObjective,
    existing: &[Vec<f64>],
    costs: &CostModel,
    pass: LazyPass,
    stats: &mut SelectionStats,
) -> Result<Vec<usize>> {
    let grid = objective.grid();
    let mut state = objective.empty_state(existing.to_vec())?;
    let key = |gain: f64, cell: usize| match pass {
        LazyPass::UniformCost => gain,
        LazyPass::CostBenefit => gain / costs.cost(cell),
    };
    for t in 0..objective.frames() {
        let mut entries: Vec<LazyEntry> = feasible_candidates(grid, state.sequence().last().copied())?
            .into_iter()
            .map(|cell| {
                let bound = objective
                    .gain_upper_bound(&state, Region::new(t, cell))
                    .unwrap_or(f64::INFINITY);
                LazyEntry {
                    cell,
                    key: key(bound, cell),
                    fresh: false,
                }
            })
            .collect();
        loop {
            // highest key first, lowest region index among equal keys
            let top = entries
                .iter_mut()
                .max_by(|a, b| a.key.total_cmp(&b.key).then(b.cell.cmp(&a.cell)))
                .ok_or_else(|| Error::Internal(format!("no feasible region at frame {t}")))?;
            let region = Region::new(t, top.cell);
            if top.fresh {
                objective.commit(&mut state, region)?;
                break;
            }
            let gain = objective.marginal_gain(&state, region)?;
            stats.gain_evaluations += 1;
            top.key = key(gain, top.cell);
            top.fresh = true;
        }
    }
    Ok(state.sequence().to_vec())
}

/// Lazy-forward (CELF) selection.
///
/// Candidates start from an upper bound on their gain (region mass plus the
/// largest possible coherence) and are only evaluated when their bound tops
/// the queue; a candidate whose freshly evaluated gain still tops the queue is
/// taken. Both the uniform-cost and cost-benefit passes run and the sequence
/// with the larger objective wins; with uniform costs the cost-benefit pass is
/// identical and skipped.
pub fn celf_select(
    objective: &SequenceObjective,
    existing: &[Vec<f64>],
    costs: &CostModel,
) -> Result<CelfSelection> {
    let grid = objective.grid();
    costs.validate(grid.len())?;
    let mut stats = SelectionStats::default();
    let uc = lazy_forward(objective, existing, costs, LazyPass::UniformCost, &mut stats)?;
    let uc_value = objective.evaluate_value(&uc, existing)?;
    let mut best = (uc, uc_value, LazyPass::UniformCost);
    if !costs.is_uniform() {
        let cb = lazy_forward(objective, existing, costs, LazyPass::CostBenefit, &mut stats)?;
        let cb_value = objective.evaluate_value(&cb, existing)?;
        if cb_value > best.1 {
            best = (cb, cb_value, LazyPass::CostBenefit);
        }
    }
    Ok(CelfSelection {
        sequence: RegionSequence::new(grid, best.0)?,
        value: best.1,
        pass: best.2,
        stats,
    })
}

/// Which maximizer builds each sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    Greedy,
    #[default]
    Celf,
    CelfWithCosts(CostModel),
}

impl SelectionStrategy {
    pub fn select(&self, objective: &SequenceObjective, existing: &[Vec<f64>]) -> Result<Selection> {
        let celf = |costs: &CostModel| {
            celf_select(objective, existing, costs).map(|s| Selection {
                sequence: s.sequence,
                value: s.value,
                stats: s.stats,
            })
        };
        match self {
            SelectionStrategy::Greedy => greedy_select(objective, existing),
            SelectionStrategy::Celf => celf(&CostModel::Unit),
            SelectionStrategy::CelfWithCosts(costs) => celf(costs),
        }
    }
}

/// One emitted sequence with its word distribution and objective terms
/// (diversity measured against the sequences emitted before it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSequence {
    pub sequence: RegionSequence,
    pub value: f64,
    pub components: Components,
    pub distribution: Vec<f64>,
    pub stats: SelectionStats,
}

/// Emits `k` sequences: the first without any diversity term, every later
/// one with diversity against the distributions of all earlier ones.
pub fn generate_sequences(
    objective: &SequenceObjective,
    k: usize,
    strategy: &SelectionStrategy,
) -> Result<Vec<GeneratedSequence>> {
    if k == 0 {
        return Err(Error::Parameter("number of sequences must be at least 1".into()));
    }
    let mut out: Vec<GeneratedSequence> = Vec::with_capacity(k);
    let mut existing: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let sel = strategy.select(objective, &existing)?;
        let components = objective.evaluate(sel.sequence.regions(), &existing)?;
        let distribution = objective.distribution(sel.sequence.regions())?;
        existing.push(distribution.clone());
        out.push(GeneratedSequence {
            sequence: sel.sequence,
            value: sel.value,
            components,
            distribution,
            stats: sel.stats,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridShape;
    use crate::submodular::fixtures::{tiny_featmap, tiny_probmap};
    use crate::submodular::{
        LexicalMode, LexicalProbMap, RegionFeatureMap, ScoringOptions, SubmodularWeights,
    };

    fn obj<'a>(
        p: &'a LexicalProbMap,
        f: &'a RegionFeatureMap,
        w: [f64; 3],
        mode: LexicalMode,
    ) -> SequenceObjective<'a> {
        SequenceObjective::new(
            p,
            f,
            SubmodularWeights::from_array(w).unwrap(),
            mode,
            ScoringOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn greedy_on_tiny_fixture() {
        let (p, f) = (tiny_probmap(), tiny_featmap());
        let o = obj(&p, &f, [1.0, 0.0, 0.0], LexicalMode::Unsupervised);
        let s = greedy_select(&o, &[]).unwrap();
        assert_eq!(s.sequence.regions(), &[0, 1]);
        assert!((s.value - 1.8).abs() < 1e-12);
        assert_eq!(s.stats.gain_evaluations, 4);

        let o = obj(&p, &f, [1.0, 0.0, 0.0], LexicalMode::supervised(vec![1], 0.1));
        let s = greedy_select(&o, &[]).unwrap();
        assert!((s.value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn single_frame_picks_best_region() {
        let g = GridShape::new(2, 2).unwrap();
        let p = LexicalProbMap::new(g, 1, 2, vec![0.1, 0.1, 0.4, 0.5, 0.9, 0.1, 0.2, 0.2]).unwrap();
        let f = RegionFeatureMap::new(g, 1, 1, vec![1.0; 4]).unwrap();
        for w in [[1.0, 0.0, 0.0], [0.3, 2.0, 5.0]] {
            let o = obj(&p, &f, w, LexicalMode::Unsupervised);
            let greedy = greedy_select(&o, &[]).unwrap();
            assert_eq!(greedy.sequence.regions(), &[2]);
            assert_eq!(celf_select(&o, &[], &CostModel::Unit).unwrap().sequence, greedy.sequence);
        }
    }

    #[test]
    fn cost_model_validation() {
        assert!(CostModel::PerRegion(vec![1.0, 0.0]).validate(2).is_err());
        assert!(CostModel::PerRegion(vec![1.0]).validate(2).is_err());
        assert!(CostModel::PerRegion(vec![2.0, 2.0]).is_uniform());
        let (p, f) = (tiny_probmap(), tiny_featmap());
        let o = obj(&p, &f, [1.0, 0.0, 0.0], LexicalMode::Unsupervised);
        assert!(matches!(
            celf_select(&o, &[], &CostModel::PerRegion(vec![1.0, -1.0])),
            Err(Error::CostModel(_))
        ));
    }

    #[test]
    fn cost_benefit_pass_runs_with_unequal_costs() {
        let (p, f) = (tiny_probmap(), tiny_featmap());
        let o = obj(&p, &f, [1.0, 0.0, 0.0], LexicalMode::Unsupervised);
        let unit = celf_select(&o, &[], &CostModel::Unit).unwrap();
        let costly = celf_select(&o, &[], &CostModel::PerRegion(vec![1.0, 3.0])).unwrap();
        assert!(costly.value >= unit.value - 1e-12);
        assert!(costly.stats.gain_evaluations > unit.stats.gain_evaluations);
    }

    #[test]
    fn generate_rejects_zero_and_repeats_without_diversity() {
        let (p, f) = (tiny_probmap(), tiny_featmap());
        let o = obj(&p, &f, [1.0, 0.0, 1.0], LexicalMode::Unsupervised);
        assert!(generate_sequences(&o, 0, &SelectionStrategy::Greedy).is_err());
        let seqs = generate_sequences(&o, 2, &SelectionStrategy::Celf).unwrap();
        assert_eq!(seqs[0].sequence, seqs[1].sequence);
        let single = generate_sequences(&o, 1, &SelectionStrategy::Greedy).unwrap();
        assert_eq!(single[0].sequence, greedy_select(&o, &[]).unwrap().sequence);
    }
}
