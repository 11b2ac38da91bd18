//! Top-k lexical labels of a sequence, used as a stand-in caption.

use serde::{Deserialize, Serialize};

use crate::lexmodel::Vocabulary;
use crate::selector::RegionSequence;
use crate::submodular::LexicalProbMap;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedWord {
    pub word: String,
    pub index: usize,
    /// Max-pooled probability along the sequence.
    pub prob: f64,
}

/// Words ranked by pooled probability (descending, ties by vocabulary
/// index). `top_k` above the vocabulary size is clipped with a warning.
pub fn proxy_caption(
    sequence: &RegionSequence,
    probmap: &LexicalProbMap,
    vocabulary: &Vocabulary,
    top_k: usize,
) -> Result<Vec<RankedWord>> {
    if top_k == 0 {
        return Err(Error::Parameter("top_k must be at least 1".into()));
    }
    if vocabulary.len() != probmap.vocab_size() {
        return Err(Error::Vocabulary(format!(
            "{} vocabulary words for {} probability channels",
            vocabulary.len(),
            probmap.vocab_size()
        )));
    }
    if sequence.is_empty() || sequence.len() > probmap.frames() {
        return Err(Error::Shape(format!(
            "sequence of {} regions for {} frames",
            sequence.len(),
            probmap.frames()
        )));
    }
    sequence.validate(probmap.grid())?;
    let k = if top_k > vocabulary.len() {
        log::warn!("top_k {top_k} exceeds vocabulary size {}, clipping", vocabulary.len());
        vocabulary.len()
    } else {
        top_k
    };
    let pooled = probmap.pooled(sequence.regions());
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[b].total_cmp(&pooled[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| RankedWord {
            word: vocabulary.words()[i].clone(),
            index: i,
            prob: pooled[i],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::fixtures;

    fn vocab() -> Vocabulary {
        Vocabulary::new(["dog", "ball"]).unwrap()
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let p = fixtures::tiny_probmap();
        let seq = RegionSequence::new(p.grid(), vec![0, 1]).unwrap();
        let words = proxy_caption(&seq, &p, &vocab(), 1).unwrap();
        assert_eq!(words.len(), 1);
        assert_eq!(words[0].word, "dog");
        assert_eq!(words[0].prob, 0.9);
    }

    #[test]
    fn clipped_to_vocabulary() {
        let p = fixtures::tiny_probmap();
        let seq = RegionSequence::new(p.grid(), vec![1, 0]).unwrap();
        let words = proxy_caption(&seq, &p, &vocab(), 9).unwrap();
        let mut idx: Vec<usize> = words.iter().map(|w| w.index).collect();
        idx.sort();
        assert_eq!(idx, vec![0, 1]);
        assert!(proxy_caption(&seq, &p, &vocab(), 0).is_err());
    }
}
