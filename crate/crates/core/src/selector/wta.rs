use serde::{Deserialize, Serialize};

use super::RegionSequence;
use crate::lexmodel::Vocabulary;
use crate::submodular::LexicalProbMap;
use crate::{Error, Result};

/// Matching-score threshold used for sentence association.
pub const DEFAULT_THETA: f64 = 0.1;

/// Vocabulary words of one caption sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceLexicalSet {
    pub id: String,
    /// Sorted, deduplicated vocabulary indices.
    pub words: Vec<usize>,
}

impl SentenceLexicalSet {
    pub fn new(id: impl Into<String>, mut words: Vec<usize>) -> Self {
        words.sort_unstable();
        words.dedup();
        SentenceLexicalSet {
            id: id.into(),
            words,
        }
    }

    pub fn from_text(id: impl Into<String>, text: &str, vocab: &Vocabulary) -> Self {
        SentenceLexicalSet {
            id: id.into(),
            words: vocab.lexical_subset(text),
        }
    }
}

/// Winner-takes-all outcome for one sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub sentence_id: String,
    /// Index of the winning sequence; `None` when every score is zero.
    pub sequence: Option<usize>,
    /// Matching score of the winner (0 when unassociated).
    pub score: f64,
    /// Matching score of every candidate sequence.
    pub scores: Vec<f64>,
}

/// Associates every sentence to the sequence with the highest thresholded
/// lexical matching score: per sentence word, the probability is max-pooled
/// over the sequence's regions, pooled values below `theta` are dropped and
/// the rest summed. Ties go to the lowest sequence index.
pub fn wta_associate(
    sentences: &[SentenceLexicalSet],
    sequences: &[RegionSequence],
    probmap: &LexicalProbMap,
    theta: f64,
) -> Result<Vec<Association>> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::Parameter(format!("theta must lie in [0, 1), got {theta}")));
    }
    if sequences.is_empty() {
        return Err(Error::Precondition("no candidate sequences".into()));
    }
    for s in sequences {
        if s.len() > probmap.frames() {
            return Err(Error::Shape(format!(
                "sequence has {} regions, video has {} frames",
                s.len(),
                probmap.frames()
            )));
        }
        s.validate(probmap.grid())?;
    }
    let pooled: Vec<Vec<f64>> = sequences.iter().map(|s| probmap.pooled(s.regions())).collect();
    sentences
        .iter()
        .map(|sentence| {
            if let Some(w) = sentence.words.iter().find(|&&w| w >= probmap.vocab_size()) {
                return Err(Error::Vocabulary(format!(
                    "sentence {} uses word index {w} outside vocabulary of size {}",
                    sentence.id,
                    probmap.vocab_size()
                )));
            }
            let scores: Vec<f64> = pooled
                .iter()
                .map(|p| {
                    sentence
                        .words
                        .iter()
                        .map(|&w| p[w])
                        .filter(|&pw| pw >= theta)
                        .sum()
                })
                .collect();
            let mut winner: Option<(usize, f64)> = None;
            for (i, &s) in scores.iter().enumerate() {
                if s > 0.0 && winner.is_none_or(|(_, best)| s > best) {
                    winner = Some((i, s));
                }
            }
            Ok(Association {
                sentence_id: sentence.id.clone(),
                sequence: winner.map(|(i, _)| i),
                score: winner.map_or(0.0, |(_, s)| s),
                scores,
            })
        })
        .collect()
}
