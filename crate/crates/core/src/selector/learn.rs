//! Weight learning from video-level sentences.
//!
//! Alternates between generating sequences with the current weights,
//! associating each training sentence to its winner-takes-all sequence, and
//! refining the weights by projected subgradient descent on a structured
//! hinge loss that asks the winner to outscore every other generated
//! sequence by a unit margin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_sequences, wta_associate, RegionSequence, SelectionStrategy};
use super::{SentenceLexicalSet, DEFAULT_THETA};
use crate::submodular::{
    Components, LexicalMode, LexicalProbMap, RegionFeatureMap, ScoringOptions, SequenceObjective,
    SubmodularWeights,
};
use crate::{Error, Result};

/// Objective terms of an associated winner and of its competitors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HingeSample {
    pub winner: Components,
    pub competitors: Vec<Components>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// Index of the first maximizer of `Δ(r, r*) + w·f(r)` with the winner
/// (margin 0) ranked before the competitors (margin 1); `None` = winner.
fn worst_violator(weights: &SubmodularWeights, sample: &HingeSample) -> Result<(Option<usize>, f64)> {
    if sample.competitors.is_empty() {
        return Err(Error::Precondition("hinge sample has no competitors".into()));
    }
    let mut best = (None, weights.dot(&sample.winner));
    for (i, c) in sample.competitors.iter().enumerate() {
        let v = 1.0 + weights.dot(c);
        if v > best.1 {
            best = (Some(i), v);
        }
    }
    Ok(best)
}

/// `(1/N) Σ_i [max_r (Δ(r, r*_i) + w·f(r)) - w·f(r*_i)] + (λ/2)‖w‖²`.
pub fn hinge_objective(weights: &SubmodularWeights, samples: &[HingeSample], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mut total = 0.0;
    for s in samples {
        let (_, max) = worst_violator(weights, s)?;
        total += max - weights.dot(&s.winner);
    }
    let mean = if samples.is_empty() {
        0.0
    } else {
        total / samples.len() as f64
    };
    let w = weights.as_array();
    Ok(mean + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>())
}

/// A subgradient of [`hinge_objective`] with respect to `[w_inf, w_div, w_coh]`.
pub fn hinge_subgradient(weights: &SubmodularWeights, samples: &[HingeSample], lambda: f64) -> Result<[f64; 3]> {
    check_lambda(lambda)?;
    let mut g = [0.0; 3];
    for s in samples {
        if let (Some(i), _) = worst_violator(weights, s)? {
            let (c, win) = (s.competitors[i].as_array(), s.winner.as_array());
            for k in 0..3 {
                g[k] += c[k] - win[k];
            }
        }
    }
    if !samples.is_empty() {
        let n = samples.len() as f64;
        g.iter_mut().for_each(|v| *v /= n);
    }
    let w = weights.as_array();
    for k in 0..3 {
        g[k] += lambda * w[k];
    }
    Ok(g)
}

/// Objective terms of `sequences[index]` as seen by one sentence:
/// informativeness restricted to the sentence words (thresholded at `theta`),
/// diversity against every other sequence, and accumulated coherence.
pub fn sequence_features(
    probmap: &LexicalProbMap,
    featmap: &RegionFeatureMap,
    sequences: &[RegionSequence],
    index: usize,
    sentence: &SentenceLexicalSet,
    theta: f64,
    options: ScoringOptions,
) -> Result<Components> {
    let objective = SequenceObjective::new(
        probmap,
        featmap,
        SubmodularWeights::ones(),
        LexicalMode::supervised(sentence.words.clone(), theta),
        options,
    )?;
    let others = sequences
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, s)| objective.distribution(s.regions()))
        .collect::<Result<Vec<_>>>()?;
    objective.evaluate(sequences[index].regions(), &others)
}

/// One training video: its tensors and video-level sentences.
#[derive(Clone, Debug)]
pub struct TrainingVideo {
    pub probmap: LexicalProbMap,
    pub featmap: RegionFeatureMap,
    pub sentences: Vec<SentenceLexicalSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub lambda: f64,
    pub outer_iters: usize,
    /// Projected subgradient steps per outer iteration.
    pub inner_steps: usize,
    /// Step `j` of an outer iteration uses `step_size / sqrt(j + 1)`.
    pub step_size: f64,
    pub sequences_per_video: usize,
    pub theta: f64,
    /// Stop once `‖w_new - w_old‖_∞` falls below this.
    pub tolerance: f64,
    pub options: ScoringOptions,
    pub strategy: SelectionStrategy,
    pub initial: SubmodularWeights,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            lambda: 1e-3,
            outer_iters: 20,
            inner_steps: 25,
            step_size: 0.05,
            sequences_per_video: 3,
            theta: DEFAULT_THETA,
            tolerance: 1e-4,
            options: ScoringOptions::default(),
            strategy: SelectionStrategy::Celf,
            initial: SubmodularWeights::ones(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.outer_iters == 0 {
            return Err(Error::Parameter("outer_iters must be at least 1".into()));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Parameter(format!("invalid step size {}", self.step_size)));
        }
        if self.sequences_per_video == 0 {
            return Err(Error::Parameter("sequences_per_video must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::Parameter(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        self.options.validate()?;
        SubmodularWeights::from_array(self.initial.as_array())?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub weights: SubmodularWeights,
    /// Hinge objective after each outer iteration.
    pub trace: Vec<f64>,
    /// Weights after each outer iteration.
    pub history: Vec<SubmodularWeights>,
    /// Number of hinge samples per outer iteration.
    pub samples: Vec<usize>,
    pub converged: bool,
}

fn video_samples(
    video: &TrainingVideo,
    weights: SubmodularWeights,
    config: &LearnConfig,
) -> Result<Vec<HingeSample>> {
    let objective = SequenceObjective::new(
        &video.probmap,
        &video.featmap,
        weights,
        LexicalMode::Unsupervised,
        config.options,
    )?;
    let generated = generate_sequences(&objective, config.sequences_per_video, &config.strategy)?;
    let sequences: Vec<RegionSequence> = generated.into_iter().map(|g| g.sequence).collect();
    let associations = wta_associate(&video.sentences, &sequences, &video.probmap, config.theta)?;
    let mut samples = Vec::new();
    for (sentence, assoc) in video.sentences.iter().zip(&associations) {
        let Some(win) = assoc.sequence else { continue };
        let features = |i| {
            sequence_features(
                &video.probmap,
                &video.featmap,
                &sequences,
                i,
                sentence,
                config.theta,
                config.options,
            )
        };
        let competitors = (0..sequences.len())
            .filter(|&i| sequences[i] != sequences[win])
            .map(features)
            .collect::<Result<Vec<_>>>()?;
        if competitors.is_empty() {
            continue;
        }
        samples.push(HingeSample {
            winner: features(win)?,
            competitors,
        });
    }
    Ok(samples)
}

fn project(w: [f64; 3]) -> [f64; 3] {
    w.map(|v| v.max(0.0))
}

/// Alternating optimization of the objective weights, starting from
/// `config.initial` (all ones by default).
pub fn learn_weights(videos: &[TrainingVideo], config: &LearnConfig) -> Result<LearnOutcome> {
    config.validate()?;
    let mut weights = config.initial;
    let mut outcome = LearnOutcome {
        weights,
        trace: Vec::new(),
        history: Vec::new(),
        samples: Vec::new(),
        converged: false,
    };
    for _ in 0..config.outer_iters {
        let per_video = videos
            .par_iter()
            .map(|v| video_samples(v, weights, config))
            .collect::<Result<Vec<_>>>()?;
        let samples: Vec<HingeSample> = per_video.into_iter().flatten().collect();

        let previous = weights;
        let mut w = weights.as_array();
        for j in 0..config.inner_steps {
            let g = hinge_subgradient(&SubmodularWeights::from_array(w)?, &samples, config.lambda)?;
            let eta = config.step_size / ((j + 1) as f64).sqrt();
            w = project([w[0] - eta * g[0], w[1] - eta * g[1], w[2] - eta * g[2]]);
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    epoch: outcome.trace.len(),
                    loss: f64::NAN,
                });
            }
        }
        weights = SubmodularWeights::from_array(w)?;
        let value = hinge_objective(&weights, &samples, config.lambda)?;
        if !value.is_finite() {
            return Err(Error::Divergence {
                epoch: outcome.trace.len(),
                loss: value,
            });
        }
        outcome.trace.push(value);
        outcome.history.push(weights);
        outcome.samples.push(samples.len());

        let change = previous
            .as_array()
            .iter()
            .zip(weights.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < config.tolerance {
            outcome.converged = true;
            break;
        }
    }
    outcome.weights = weights;
    Ok(outcome)
}
