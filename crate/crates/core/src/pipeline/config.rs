//! Run configuration, read from JSON. Every field is optional in the file;
//! missing fields take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diversity::PairNormalization;
use crate::lexmodel::TrainConfig;
use crate::selector::{CostModel, LearnConfig, SelectionStrategy, DEFAULT_THETA};
use crate::submodular::{ScoringOptions, SubmodularWeights, DEFAULT_SMOOTHING};
use crate::{Error, Result};

/// Tie-breaking between equal gains or scores. Only lowest-index is
/// implemented; the field exists so configs state it explicitly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Maximizer {
    Greedy,
    #[default]
    Celf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// WTA / supervised informativeness threshold.
    pub theta: f64,
    /// Sequences generated per video.
    pub sequences: usize,
    /// Weight-learning regularizer.
    pub lambda: f64,
    /// Additive smoothing of sequence word distributions.
    pub smoothing: f64,
    /// Objective weights; also the starting point of weight learning.
    pub weights: SubmodularWeights,
    pub seed: u64,
    pub tie_break: TieBreak,
    /// Normalization of the caption diversity score.
    pub normalization: PairNormalization,
    pub coherence_transform: bool,
    pub cost_model: CostModel,
    pub maximizer: Maximizer,
    pub outer_iters: usize,
    pub inner_steps: usize,
    pub step_size: f64,
    pub tolerance: f64,
    /// LSA rank for diversity and clustering; `None` uses `min(20, rank)`.
    pub lsa_rank: Option<usize>,
    pub clusters: usize,
    /// Words emitted per proxy caption.
    pub top_k: usize,
    pub lexical: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let learn = LearnConfig::default();
        RunConfig {
            theta: DEFAULT_THETA,
            sequences: learn.sequences_per_video,
            lambda: learn.lambda,
            smoothing: DEFAULT_SMOOTHING,
            weights: SubmodularWeights::ones(),
            seed: 0,
            tie_break: TieBreak::LowestIndex,
            normalization: PairNormalization::default(),
            coherence_transform: true,
            cost_model: CostModel::Unit,
            maximizer: Maximizer::Celf,
            outer_iters: learn.outer_iters,
            inner_steps: learn.inner_steps,
            step_size: learn.step_size,
            tolerance: learn.tolerance,
            lsa_rank: None,
            clusters: 5,
            top_k: 5,
            lexical: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let config: RunConfig = serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            field: path.display().to_string(),
            offset: 0,
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::Parameter(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        if self.sequences == 0 {
            return Err(Error::Parameter("sequences must be at least 1".into()));
        }
        if self.clusters == 0 || self.top_k == 0 {
            return Err(Error::Parameter("clusters and top_k must be at least 1".into()));
        }
        if self.lsa_rank == Some(0) {
            return Err(Error::Parameter("lsa_rank must be at least 1".into()));
        }
        SubmodularWeights::from_array(self.weights.as_array())?;
        self.options().validate()?;
        self.learn_config().validate()
    }

    pub fn options(&self) -> ScoringOptions {
        ScoringOptions {
            smoothing: self.smoothing,
            coherence_transform: self.coherence_transform,
        }
    }

    pub fn strategy(&self) -> SelectionStrategy {
        match (self.maximizer, &self.cost_model) {
            (Maximizer::Greedy, _) => SelectionStrategy::Greedy,
            (Maximizer::Celf, CostModel::Unit) => SelectionStrategy::Celf,
            (Maximizer::Celf, costs) => SelectionStrategy::CelfWithCosts(costs.clone()),
        }
    }

    pub fn learn_config(&self) -> LearnConfig {
        LearnConfig {
            lambda: self.lambda,
            outer_iters: self.outer_iters,
            inner_steps: self.inner_steps,
            step_size: self.step_size,
            sequences_per_video: self.sequences,
            theta: self.theta,
            tolerance: self.tolerance,
            options: self.options(),
            strategy: self.strategy(),
            initial: self.weights,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"theta": 0.2, "weights": {"inf": 1, "div": 0, "coh": 0.5}}"#).unwrap();
        assert_eq!(c.theta, 0.2);
        assert_eq!(c.sequences, 3);
        assert_eq!(c.weights.coh, 0.5);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = [
            RunConfig { theta: 1.0, ..RunConfig::default() },
            RunConfig { sequences: 0, ..RunConfig::default() },
            RunConfig { lambda: -1.0, ..RunConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"thetta": 0.2}"#).is_err());
    }
}
