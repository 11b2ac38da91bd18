//! The three region-sequence objectives and their weighted combination.
//!
//! A partial region-sequence `A` (one region per frame, frames `0..|A|`) is
//! scored by `R(A) = w_inf * f_inf(A) + w_div * f_div(A) + w_coh * f_coh(A)`:
//!
//! - `f_inf`: sum over words of the per-word max probability pooled along
//!   the sequence (optionally restricted to a sentence's words and
//!   thresholded);
//! - `f_coh`: accumulated similarity of every selected region's feature with
//!   the features selected before it;
//! - `f_div`: sum of KL divergences from each previously emitted sequence's
//!   word distribution to the candidate's distribution.
//!
//! [`SelectionState`] caches the running per-word max so marginal gains cost
//! `O(V + |A| d)` (plus `O(N V)` when diversity is active).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::grid::GridShape;
use crate::lexmodel::dot;
use crate::{Error, Result};

/// Tolerance on `|‖x‖ - 1|` for feature vectors treated as unit-norm.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Tolerance on `|Σ p - 1|` for stored word distributions.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// Default additive smoothing of sequence word distributions.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// Per-frame, per-region word probabilities, laid out `[frame][region][word]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LexicalProbMap {
    grid: GridShape,
    frames: usize,
    vocab_size: usize,
    values: Vec<f64>,
    /// `Σ_w p` per `(frame, region)`, accumulated in word order.
    masses: Vec<f64>,
}

impl LexicalProbMap {
    pub fn new(grid: GridShape, frames: usize, vocab_size: usize, values: Vec<f64>) -> Result<Self> {
        if frames == 0 || vocab_size == 0 || grid.is_empty() {
            return Err(Error::Shape("probability map needs T, G, V >= 1".into()));
        }
        let expected = frames * grid.len() * vocab_size;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "probability map expects {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter(format!(
                "probability {} at flat index {pos} is outside [0, 1]",
                values[pos]
            )));
        }
        let masses = values
            .chunks(vocab_size)
            .map(|row| row.iter().sum())
            .collect();
        Ok(LexicalProbMap {
            grid,
            frames,
            vocab_size,
            values,
            masses,
        })
    }

    pub fn grid(&self) -> GridShape {
        self.grid
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn regions_per_frame(&self) -> usize {
        self.grid.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Word probabilities of one region.
    pub fn region(&self, frame: usize, region: usize) -> &[f64] {
        let start = (frame * self.grid.len() + region) * self.vocab_size;
        &self.values[start..start + self.vocab_size]
    }

    /// Total probability mass of one region.
    pub fn mass(&self, frame: usize, region: usize) -> f64 {
        self.masses[frame * self.grid.len() + region]
    }

    /// Per-word max over the regions of `cells` (cell `t` taken from frame `t`).
    pub fn pooled(&self, cells: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.vocab_size];
        for (t, &c) in cells.iter().enumerate() {
            for (m, &p) in out.iter_mut().zip(self.region(t, c)) {
                *m = f64::max(*m, p);
            }
        }
        out
    }
}

/// Unit-norm feature vector per frame and region, `[frame][region][dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionFeatureMap {
    grid: GridShape,
    frames: usize,
    dim: usize,
    values: Vec<f64>,
}

impl RegionFeatureMap {
    /// Builds the map, rescaling every vector whose norm is off by more than
    /// [`NORM_TOLERANCE`]. Vectors already within tolerance are kept as-is.
    pub fn new(grid: GridShape, frames: usize, dim: usize, mut values: Vec<f64>) -> Result<Self> {
        if frames == 0 || dim == 0 || grid.is_empty() {
            return Err(Error::Shape("feature map needs T, G, d >= 1".into()));
        }
        let expected = frames * grid.len() * dim;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "feature map expects {expected} values, got {}",
                values.len()
            )));
        }
        for (i, v) in values.chunks_mut(dim).enumerate() {
            let norm = dot(v, v).sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Parameter(format!(
                    "region vector {i} has norm {norm} and cannot be normalized"
                )));
            }
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        Ok(RegionFeatureMap {
            grid,
            frames,
            dim,
            values,
        })
    }

    pub fn grid(&self) -> GridShape {
        self.grid
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn region(&self, frame: usize, region: usize) -> &[f64] {
        let start = (frame * self.grid.len() + region) * self.dim;
        &self.values[start..start + self.dim]
    }
}

/// Nonnegative weights of `[f_inf, f_div, f_coh]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmodularWeights {
    pub inf: f64,
    pub div: f64,
    pub coh: f64,
}

impl Default for SubmodularWeights {
    fn default() -> Self {
        Self::ones()
    }
}

impl SubmodularWeights {
    pub fn new(inf: f64, div: f64, coh: f64) -> Result<Self> {
        let w = SubmodularWeights { inf, div, coh };
        if w.as_array().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter(format!(
                "weights must be finite and nonnegative, got {:?}",
                w.as_array()
            )));
        }
        Ok(w)
    }

    pub fn ones() -> Self {
        SubmodularWeights {
            inf: 1.0,
            div: 1.0,
            coh: 1.0,
        }
    }

    pub fn from_array(a: [f64; 3]) -> Result<Self> {
        Self::new(a[0], a[1], a[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.inf, self.div, self.coh]
    }

    pub fn dot(&self, f: &Components) -> f64 {
        self.inf * f.inf + self.div * f.div + self.coh * f.coh
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.inf * c, self.div * c, self.coh * c)
    }
}

/// Values of the three objective terms, in weight order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub inf: f64,
    pub div: f64,
    pub coh: f64,
}

impl Components {
    pub fn as_array(&self) -> [f64; 3] {
        [self.inf, self.div, self.coh]
    }
}

/// Which words count towards informativeness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LexicalMode {
    /// Every vocabulary word.
    Unsupervised,
    /// Only a sentence's words; pooled probabilities below `threshold` count as 0.
    Supervised { words: Vec<usize>, threshold: f64 },
}

impl LexicalMode {
    /// Supervised mode with `words` sorted and deduplicated.
    pub fn supervised(mut words: Vec<usize>, threshold: f64) -> Self {
        words.sort_unstable();
        words.dedup();
        LexicalMode::Supervised { words, threshold }
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if let LexicalMode::Supervised { words, threshold } = self {
            if !(0.0..1.0).contains(threshold) {
                return Err(Error::Parameter(format!(
                    "threshold must lie in [0, 1), got {threshold}"
                )));
            }
            if let Some(w) = words.iter().find(|&&w| w >= vocab_size) {
                return Err(Error::Vocabulary(format!(
                    "word index {w} outside vocabulary of size {vocab_size}"
                )));
            }
        }
        Ok(())
    }

    /// Score of a slice of per-word probabilities under this mode.
    fn score(&self, pooled: &[f64]) -> f64 {
        match self {
            LexicalMode::Unsupervised => pooled.iter().sum(),
            LexicalMode::Supervised { words, threshold } => words
                .iter()
                .map(|&w| cut(pooled[w], *threshold))
                .sum(),
        }
    }
}

/// Probabilities below the threshold count as zero.
fn cut(p: f64, threshold: f64) -> f64 {
    if p >= threshold {
        p
    } else {
        0.0
    }
}

/// Knobs of the objective that are not weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringOptions {
    /// Additive smoothing of sequence word distributions before normalizing.
    pub smoothing: f64,
    /// Map every pairwise cosine `s` to `(1 + s) / 2` before summing.
    pub coherence_transform: bool,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions {
            smoothing: DEFAULT_SMOOTHING,
            coherence_transform: true,
        }
    }
}

impl ScoringOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Parameter(format!(
                "smoothing must be finite and nonnegative, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// A partial region-sequence plus the caches needed for incremental gains.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionState {
    sequence: Vec<usize>,
    running_word_max: Vec<f64>,
    feature_cache: Vec<Vec<f64>>,
    existing_distributions: Vec<Vec<f64>>,
    coherence_total: f64,
    diversity_value: f64,
}

impl SelectionState {
    /// Empty sequence over a vocabulary of `vocab_size`, competing against
    /// the word distributions of previously emitted sequences.
    pub fn new(vocab_size: usize, existing_distributions: Vec<Vec<f64>>) -> Result<Self> {
        for (i, p) in existing_distributions.iter().enumerate() {
            if p.len() != vocab_size {
                return Err(Error::Shape(format!(
                    "stored distribution {i} has {} entries, vocabulary has {vocab_size}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Support(format!(
                    "stored distribution {i} has negative or non-finite entries"
                )));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > DISTRIBUTION_TOLERANCE {
                return Err(Error::Support(format!("stored distribution {i} sums to {s}")));
            }
        }
        Ok(SelectionState {
            sequence: Vec::new(),
            running_word_max: vec![0.0; vocab_size],
            feature_cache: Vec::new(),
            existing_distributions,
            coherence_total: 0.0,
            diversity_value: 0.0,
        })
    }

    /// Region index chosen at each frame so far.
    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    /// Frame the next region must come from.
    pub fn next_frame(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn running_word_max(&self) -> &[f64] {
        &self.running_word_max
    }

    pub fn feature_cache(&self) -> &[Vec<f64>] {
        &self.feature_cache
    }

    pub fn existing_distributions(&self) -> &[Vec<f64>] {
        &self.existing_distributions
    }

    /// Accumulated pairwise coherence of the selected regions.
    pub fn coherence_total(&self) -> f64 {
        self.coherence_total
    }
}

/// Informativeness of the state's sequence; 0 for the empty sequence.
pub fn informativeness(state: &SelectionState, mode: &LexicalMode) -> Result<f64> {
    mode.validate(state.running_word_max.len())?;
    Ok(mode.score(&state.running_word_max))
}

/// Informativeness of an arbitrary set of regions (any frames, any count),
/// the set function whose diminishing returns the greedy guarantee rests on.
pub fn set_informativeness(probmap: &LexicalProbMap, regions: &[Region], mode: &LexicalMode) -> Result<f64> {
    mode.validate(probmap.vocab_size())?;
    let mut pooled = vec![0.0; probmap.vocab_size()];
    for r in regions {
        if r.frame >= probmap.frames() {
            return Err(Error::Shape(format!(
                "frame {} outside video of {} frames",
                r.frame,
                probmap.frames()
            )));
        }
        probmap.grid().check(r.index)?;
        for (m, &p) in pooled.iter_mut().zip(probmap.region(r.frame, r.index)) {
            *m = f64::max(*m, p);
        }
    }
    Ok(mode.score(&pooled))
}

fn check_unit(x: &[f64]) -> Result<()> {
    let norm = dot(x, x).sqrt();
    if norm.is_nan() || (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Normalization { norm });
    }
    Ok(())
}

fn pair_similarity(a: &[f64], b: &[f64], transform: bool) -> f64 {
    let s = dot(a, b);
    if transform {
        (1.0 + s) / 2.0
    } else {
        s
    }
}

/// Similarity of a candidate feature with every previously selected feature.
pub fn coherence(state: &SelectionState, candidate: &[f64], transform: bool) -> Result<f64> {
    check_unit(candidate)?;
    if let Some(prev) = state.feature_cache.first() {
        if prev.len() != candidate.len() {
            return Err(Error::Shape(format!(
                "candidate feature has dimension {}, cached features {}",
                candidate.len(),
                prev.len()
            )));
        }
    }
    Ok(state
        .feature_cache
        .iter()
        .map(|f| pair_similarity(candidate, f, transform))
        .sum())
}

/// Normalizes `pooled + smoothing` into a distribution.
pub fn pooled_distribution(pooled: &[f64], smoothing: f64) -> Result<Vec<f64>> {
    let total: f64 = pooled.iter().map(|p| p + smoothing).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Support(
            "pooled probabilities are all zero; use positive smoothing".into(),
        ));
    }
    Ok(pooled.iter().map(|p| (p + smoothing) / total).collect())
}

/// Word distribution of the state's (non-empty) sequence.
pub fn sequence_distribution(state: &SelectionState, smoothing: f64) -> Result<Vec<f64>> {
    if state.is_empty() {
        return Err(Error::Precondition(
            "word distribution of an empty sequence is undefined".into(),
        ));
    }
    pooled_distribution(&state.running_word_max, smoothing)
}

/// `Σ_w p log(p / q)` in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape("distributions differ in length".into()));
    }
    let mut total = 0.0;
    for (w, (&pw, &qw)) in p.iter().zip(q).enumerate() {
        if pw == 0.0 {
            continue;
        }
        if qw.is_nan() || qw <= 0.0 {
            return Err(Error::Support(format!(
                "candidate distribution has zero mass at word {w}"
            )));
        }
        total += pw * (pw / qw).ln();
    }
    Ok(total)
}

/// Sum of KL divergences from every stored distribution to `q`; 0 when none are stored.
pub fn diversity(state: &SelectionState, q: &[f64]) -> Result<f64> {
    state
        .existing_distributions
        .iter()
        .map(|p| kl_divergence(p, q))
        .sum()
}

/// A candidate region: `index` within the grid of frame `frame`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub frame: usize,
    pub index: usize,
}

impl Region {
    pub fn new(frame: usize, index: usize) -> Self {
        Region { frame, index }
    }
}

/// Everything needed to score region-sequences of one video.
#[derive(Debug)]
pub struct SequenceObjective<'a> {
    probmap: &'a LexicalProbMap,
    featmap: &'a RegionFeatureMap,
    weights: SubmodularWeights,
    mode: LexicalMode,
    options: ScoringOptions,
    supervised_masses: OnceLock<Vec<f64>>,
}

impl<'a> SequenceObjective<'a> {
    pub fn new(
        probmap: &'a LexicalProbMap,
        featmap: &'a RegionFeatureMap,
        weights: SubmodularWeights,
        mode: LexicalMode,
        options: ScoringOptions,
    ) -> Result<Self> {
        if probmap.frames() != featmap.frames() || probmap.grid() != featmap.grid() {
            return Err(Error::Shape(format!(
                "probability map is {}x{:?}, feature map is {}x{:?}",
                probmap.frames(),
                probmap.grid(),
                featmap.frames(),
                featmap.grid()
            )));
        }
        SubmodularWeights::from_array(weights.as_array())?;
        mode.validate(probmap.vocab_size())?;
        options.validate()?;
        Ok(SequenceObjective {
            probmap,
            featmap,
            weights,
            mode,
            options,
            supervised_masses: OnceLock::new(),
        })
    }

    pub fn probmap(&self) -> &'a LexicalProbMap {
        self.probmap
    }

    pub fn featmap(&self) -> &'a RegionFeatureMap {
        self.featmap
    }

    pub fn weights(&self) -> SubmodularWeights {
        self.weights
    }

    pub fn mode(&self) -> &LexicalMode {
        &self.mode
    }

    pub fn options(&self) -> ScoringOptions {
        self.options
    }

    pub fn frames(&self) -> usize {
        self.probmap.frames()
    }

    pub fn grid(&self) -> GridShape {
        self.probmap.grid()
    }

    /// Same objective with different weights.
    pub fn with_weights(&self, weights: SubmodularWeights) -> Result<Self> {
        Self::new(
            self.probmap,
            self.featmap,
            weights,
            self.mode.clone(),
            self.options,
        )
    }

    /// Fresh empty state against the given stored distributions.
    pub fn empty_state(&self, existing: Vec<Vec<f64>>) -> Result<SelectionState> {
        SelectionState::new(self.probmap.vocab_size(), existing)
    }

    fn check_candidate(&self, state: &SelectionState, candidate: Region) -> Result<()> {
        if state.running_word_max.len() != self.probmap.vocab_size() {
            return Err(Error::Shape("state vocabulary differs from probability map".into()));
        }
        let expected = state.next_frame();
        if candidate.frame != expected || candidate.frame >= self.frames() {
            return Err(Error::Sequencing {
                candidate: candidate.frame,
                expected,
            });
        }
        self.grid().check(candidate.index)
    }

    /// Current component values of the state's sequence.
    pub fn components(&self, state: &SelectionState) -> Result<Components> {
        Ok(Components {
            inf: informativeness(state, &self.mode)?,
            div: state.diversity_value,
            coh: state.coherence_total,
        })
    }

    /// `R(A)` of the state's sequence.
    pub fn value(&self, state: &SelectionState) -> Result<f64> {
        Ok(self.weights.dot(&self.components(state)?))
    }

    /// Informativeness gain of `p` over the running max `m`.
    fn inf_gain(&self, p: &[f64], m: &[f64]) -> f64 {
        match &self.mode {
            LexicalMode::Unsupervised => p
                .iter()
                .zip(m)
                .map(|(&pw, &mw)| f64::max(0.0, pw - mw))
                .sum(),
            LexicalMode::Supervised { words, threshold } => words
                .iter()
                .map(|&w| f64::max(0.0, cut(p[w], *threshold) - cut(m[w], *threshold)))
                .sum(),
        }
    }

    fn diversity_after(&self, state: &SelectionState, p: &[f64]) -> Result<f64> {
        if state.existing_distributions.is_empty() {
            return Ok(0.0);
        }
        let pooled: Vec<f64> = state
            .running_word_max
            .iter()
            .zip(p)
            .map(|(&m, &pw)| f64::max(m, pw))
            .collect();
        let q = pooled_distribution(&pooled, self.options.smoothing)?;
        diversity(state, &q)
    }

    /// Per-component gains of adding `candidate`.
    pub fn component_gains(&self, state: &SelectionState, candidate: Region) -> Result<Components> {
        self.check_candidate(state, candidate)?;
        let p = self.probmap.region(candidate.frame, candidate.index);
        let x = self.featmap.region(candidate.frame, candidate.index);
        Ok(Components {
            inf: self.inf_gain(p, &state.running_word_max),
            div: self.diversity_after(state, p)? - state.diversity_value,
            coh: coherence(state, x, self.options.coherence_transform)?,
        })
    }

    /// Incremental `R(A ∪ {r}) - R(A)`.
    pub fn marginal_gain(&self, state: &SelectionState, candidate: Region) -> Result<f64> {
        Ok(self.weights.dot(&self.component_gains(state, candidate)?))
    }

    /// `R(A ∪ {r})`.
    pub fn objective(&self, state: &SelectionState, candidate: Region) -> Result<f64> {
        self.check_candidate(state, candidate)?;
        let p = self.probmap.region(candidate.frame, candidate.index);
        let x = self.featmap.region(candidate.frame, candidate.index);
        let pooled: Vec<f64> = state
            .running_word_max
            .iter()
            .zip(p)
            .map(|(&m, &pw)| f64::max(m, pw))
            .collect();
        let f = Components {
            inf: self.mode.score(&pooled),
            div: if state.existing_distributions.is_empty() {
                0.0
            } else {
                diversity(state, &pooled_distribution(&pooled, self.options.smoothing)?)?
            },
            coh: state.coherence_total + coherence(state, x, self.options.coherence_transform)?,
        };
        Ok(self.weights.dot(&f))
    }

    /// Appends `candidate` to the state, updating every cache.
    pub fn commit(&self, state: &mut SelectionState, candidate: Region) -> Result<()> {
        self.check_candidate(state, candidate)?;
        let p = self.probmap.region(candidate.frame, candidate.index);
        let x = self.featmap.region(candidate.frame, candidate.index);
        let coh = coherence(state, x, self.options.coherence_transform)?;
        let div = self.diversity_after(state, p)?;
        for (m, &pw) in state.running_word_max.iter_mut().zip(p) {
            *m = f64::max(*m, pw);
        }
        state.coherence_total += coh;
        state.diversity_value = div;
        state.feature_cache.push(x.to_vec());
        state.sequence.push(candidate.index);
        Ok(())
    }

    /// Upper bound on [`Self::marginal_gain`] of `candidate` that needs no
    /// evaluation against the state, or `None` when no finite bound is known
    /// (diversity active). Valid because informativeness is submodular and
    /// every pairwise coherence term is at most 1.
    pub fn gain_upper_bound(&self, state: &SelectionState, candidate: Region) -> Option<f64> {
        if self.weights.div > 0.0 && !state.existing_distributions.is_empty() {
            return None;
        }
        let mass = match &self.mode {
            LexicalMode::Unsupervised => self.probmap.mass(candidate.frame, candidate.index),
            LexicalMode::Supervised { words, threshold } => {
                let masses = self.supervised_masses.get_or_init(|| {
                    let g = self.grid().len();
                    (0..self.frames() * g)
                        .map(|i| {
                            let p = self.probmap.region(i / g, i % g);
                            words.iter().map(|&w| cut(p[w], *threshold)).sum()
                        })
                        .collect()
                });
                masses[candidate.frame * self.grid().len() + candidate.index]
            }
        };
        // pairwise terms can exceed 1 by rounding only
        let coh_bound = state.feature_cache.len() as f64 * (1.0 + 1e-9);
        Some(self.weights.inf * mass + self.weights.div * 0.0 + self.weights.coh * coh_bound)
    }

    /// Components of a full or partial sequence, computed from scratch.
    pub fn evaluate(&self, cells: &[usize], existing: &[Vec<f64>]) -> Result<Components> {
        if cells.len() > self.frames() {
            return Err(Error::Shape(format!(
                "sequence has {} regions, video has {} frames",
                cells.len(),
                self.frames()
            )));
        }
        for &c in cells {
            self.grid().check(c)?;
        }
        let pooled = self.probmap.pooled(cells);
        let feats: Vec<&[f64]> = cells
            .iter()
            .enumerate()
            .map(|(t, &c)| self.featmap.region(t, c))
            .collect();
        let mut coh = 0.0;
        for j in 1..feats.len() {
            for i in 0..j {
                coh += pair_similarity(feats[j], feats[i], self.options.coherence_transform);
            }
        }
        let div = if cells.is_empty() || existing.is_empty() {
            0.0
        } else {
            let q = pooled_distribution(&pooled, self.options.smoothing)?;
            existing
                .iter()
                .map(|p| kl_divergence(p, &q))
                .sum::<Result<f64>>()?
        };
        Ok(Components {
            inf: self.mode.score(&pooled),
            div,
            coh,
        })
    }

    /// `R` of a sequence, computed from scratch.
    pub fn evaluate_value(&self, cells: &[usize], existing: &[Vec<f64>]) -> Result<f64> {
        Ok(self.weights.dot(&self.evaluate(cells, existing)?))
    }

    /// Word distribution of a sequence.
    pub fn distribution(&self, cells: &[usize]) -> Result<Vec<f64>> {
        if cells.is_empty() {
            return Err(Error::Precondition(
                "word distribution of an empty sequence is undefined".into(),
            ));
        }
        pooled_distribution(&self.probmap.pooled(cells), self.options.smoothing)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// T=2 frames, 1x2 grid (regions A=0, B=1), V=2.
    pub fn tiny_probmap() -> LexicalProbMap {
        LexicalProbMap::new(
            GridShape::new(1, 2).unwrap(),
            2,
            2,
            vec![0.9, 0.1, 0.2, 0.8, 0.5, 0.5, 0.1, 0.9],
        )
        .unwrap()
    }

    pub fn tiny_featmap() -> RegionFeatureMap {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        RegionFeatureMap::new(
            GridShape::new(1, 2).unwrap(),
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0, s, s, 0.6, 0.8],
        )
        .unwrap()
    }
}
