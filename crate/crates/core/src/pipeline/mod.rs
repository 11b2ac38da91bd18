//! File formats, configuration and the per-video operations behind the CLI.

pub mod bundle;
pub mod config;
pub mod format;
pub mod oracle;
pub mod proxy;
pub mod rank;
pub mod synth;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bundle::{load_bundle, save_bundle, save_results, Caption, VideoBundle};
pub use config::{Maximizer, RunConfig, TieBreak};
pub use oracle::{count_feasible, oracle_search, oracle_search_with_limit, OracleSolution, ORACLE_LIMIT};
pub use proxy::{proxy_caption, RankedWord};
pub use rank::{map_rank, CategoryScoreTable, RankResult};
pub use synth::{synth_fixture, SynthKind, SynthSpec};

use crate::lexmodel::InstanceBag;
use crate::selector::{generate_sequences, wta_associate, Association, RegionSequence, TrainingVideo};
use crate::submodular::{Components, LexicalMode, SequenceObjective};
use crate::{Error, Result};

/// splitmix64 of `global` advanced `index + 1` times: independent,
/// reproducible seeds for every video of a run.
pub fn derive_seed(global: u64, index: u64) -> u64 {
    let mut z = global.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps `f` over `items` on a pool of `workers` threads (`None`: one per
/// core). Output order follows input order; the first failing item's error
/// is returned.
pub fn run_pool<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync + Send,
{
    if workers == Some(0) {
        return Err(Error::Parameter("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let results: Vec<Result<R>> = pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect());
    results.into_iter().collect()
}

pub fn objective_for<'a>(
    bundle: &'a VideoBundle,
    config: &RunConfig,
    mode: LexicalMode,
) -> Result<SequenceObjective<'a>> {
    SequenceObjective::new(&bundle.probmap, &bundle.featmap, config.weights, mode, config.options())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub regions: Vec<usize>,
    pub value: f64,
    pub components: Components,
    pub gain_evaluations: usize,
    /// Top words along the sequence, when the bundle has a vocabulary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<Vec<RankedWord>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSelection {
    pub id: String,
    pub sequences: Vec<SequenceReport>,
}

impl VideoSelection {
    pub fn region_sequences(&self, bundle: &VideoBundle) -> Result<Vec<RegionSequence>> {
        self.sequences
            .iter()
            .map(|s| RegionSequence::new(bundle.probmap.grid(), s.regions.clone()))
            .collect()
    }
}

/// Generates `config.sequences` diverse sequences for one video.
pub fn select_video(bundle: &VideoBundle, config: &RunConfig) -> Result<VideoSelection> {
    let objective = objective_for(bundle, config, LexicalMode::Unsupervised)?;
    let generated = generate_sequences(&objective, config.sequences, &config.strategy())?;
    let sequences = generated
        .into_iter()
        .map(|g| {
            let caption = match &bundle.vocabulary {
                Some(v) => Some(proxy_caption(&g.sequence, &bundle.probmap, v, config.top_k)?),
                None => None,
            };
            Ok(SequenceReport {
                regions: g.sequence.regions().to_vec(),
                value: g.value,
                components: g.components,
                gain_evaluations: g.stats.gain_evaluations,
                caption,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoSelection {
        id: bundle.id.clone(),
        sequences,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoAssociation {
    pub id: String,
    pub associations: Vec<Association>,
}

/// Winner-takes-all association of the bundle's captions to `sequences`.
pub fn associate_video(
    bundle: &VideoBundle,
    sequences: &[RegionSequence],
    config: &RunConfig,
) -> Result<VideoAssociation> {
    Ok(VideoAssociation {
        id: bundle.id.clone(),
        associations: wta_associate(&bundle.sentences()?, sequences, &bundle.probmap, config.theta)?,
    })
}

pub fn training_video(bundle: &VideoBundle) -> Result<TrainingVideo> {
    Ok(TrainingVideo {
        probmap: bundle.probmap.clone(),
        featmap: bundle.featmap.clone(),
        sentences: bundle.sentences()?,
    })
}

/// One bag per frame: the frame's region features are the instances, the
/// labels are the words of any of the video's captions.
pub fn lexical_bags(bundle: &VideoBundle) -> Result<Vec<InstanceBag>> {
    let vocab = bundle.vocabulary()?;
    let mut labels = vec![false; vocab.len()];
    for s in bundle.sentences()? {
        for w in s.words {
            labels[w] = true;
        }
    }
    let grid = bundle.featmap.grid();
    (0..bundle.featmap.frames())
        .map(|t| {
            let instances = (0..grid.len()).map(|g| bundle.featmap.region(t, g).to_vec()).collect();
            InstanceBag::new(instances, labels.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map(|i| derive_seed(7, i)).collect();
        let b: Vec<u64> = (0..4).map(|i| derive_seed(7, i)).collect();
        assert_eq!(a, b);
        let mut u = a.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 4);
        assert_ne!(derive_seed(8, 0), a[0]);
    }

    #[test]
    fn pool_preserves_order_and_reports_first_error() {
        let items: Vec<usize> = (0..20).collect();
        let out = run_pool(&items, Some(3), |i, &x| Ok(i * 10 + x)).unwrap();
        assert_eq!(out, (0..20).map(|i| i * 11).collect::<Vec<_>>());
        let err = run_pool(&items, Some(3), |_, &x| {
            if x >= 5 {
                Err(Error::Internal(format!("{x}")))
            } else {
                Ok(x)
            }
        });
        assert!(matches!(err, Err(Error::Internal(m)) if m == "5"));
    }

    #[test]
    fn select_and_associate_synthetic() {
        let b = synth_fixture(&SynthSpec::default(), 5).unwrap();
        let config = RunConfig::default();
        let sel = select_video(&b, &config).unwrap();
        assert_eq!(sel.sequences.len(), 3);
        let seqs = sel.region_sequences(&b).unwrap();
        let assoc = associate_video(&b, &seqs, &config).unwrap();
        assert_eq!(assoc.associations.len(), b.captions.as_ref().unwrap().len());
        let bags = lexical_bags(&b).unwrap();
        assert_eq!(bags.len(), 8);
        assert_eq!(bags[0].instances().len(), 16);
    }
}
