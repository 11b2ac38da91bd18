//! Region-sequence construction on the anchor grid.
//!
//! A region-sequence holds one region per frame; consecutive regions must lie
//! in each other's 3x3 neighborhood. Sequences are grown frame by frame by
//! maximal marginal gain ([`greedy_select`], [`celf_select`]), several
//! diverse ones are emitted per video ([`generate_sequences`]), sentences are
//! associated to them winner-takes-all ([`wta_associate`]) and the objective
//! weights are learned from those associations ([`learn_weights`]).

mod greedy;
mod learn;
mod wta;

pub use greedy::{
    celf_select, generate_sequences, greedy_select, CelfSelection, CostModel, GeneratedSequence,
    LazyPass, Selection, SelectionStats, SelectionStrategy,
};
pub use learn::{
    hinge_objective, hinge_subgradient, learn_weights, sequence_features, HingeSample,
    LearnConfig, LearnOutcome, TrainingVideo,
};
pub use wta::{wta_associate, Association, SentenceLexicalSet, DEFAULT_THETA};

use serde::{Deserialize, Serialize};

use crate::grid::GridShape;
use crate::{Error, Result};

/// Regions selectable at the next frame: every region for the first frame,
/// otherwise the clipped 3x3 neighborhood of the previous region.
pub fn feasible_candidates(grid: GridShape, previous: Option<usize>) -> Result<Vec<usize>> {
    match previous {
        None => Ok((0..grid.len()).collect()),
        Some(prev) => grid.neighborhood(prev),
    }
}

/// One region index per frame, frames `0..len`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionSequence {
    regions: Vec<usize>,
}

impl RegionSequence {
    /// Checks bounds and the neighborhood constraint.
    pub fn new(grid: GridShape, regions: Vec<usize>) -> Result<Self> {
        let seq = RegionSequence { regions };
        seq.validate(grid)?;
        Ok(seq)
    }

    pub fn validate(&self, grid: GridShape) -> Result<()> {
        for &r in &self.regions {
            grid.check(r)?;
        }
        for (t, pair) in self.regions.windows(2).enumerate() {
            if !grid.adjacent(pair[0], pair[1]) {
                return Err(Error::Precondition(format!(
                    "regions {} (frame {t}) and {} (frame {}) are not neighbors",
                    pair[0],
                    pair[1],
                    t + 1
                )));
            }
        }
        Ok(())
    }

    pub fn regions(&self) -> &[usize] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// `(frame, region)` pairs.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.regions.iter().copied().enumerate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_candidates_examples() {
        let g = GridShape::default();
        assert_eq!(feasible_candidates(g, None).unwrap().len(), 16);
        assert_eq!(feasible_candidates(g, Some(0)).unwrap(), vec![0, 1, 4, 5]);
        assert_eq!(feasible_candidates(g, Some(5)).unwrap().len(), 9);
        assert!(matches!(
            feasible_candidates(g, Some(16)),
            Err(Error::Bounds { region: 16, len: 16 })
        ));
        let one = GridShape::new(1, 1).unwrap();
        assert_eq!(feasible_candidates(one, Some(0)).unwrap(), vec![0]);
        assert_eq!(feasible_candidates(one, None).unwrap(), vec![0]);
    }

    #[test]
    fn sequence_rejects_jumps() {
        let g = GridShape::default();
        assert!(RegionSequence::new(g, vec![0, 5, 10, 15]).is_ok());
        assert!(RegionSequence::new(g, vec![0, 2]).is_err());
        assert!(RegionSequence::new(g, vec![0, 16]).is_err());
        let s = RegionSequence::new(g, vec![3, 7]).unwrap();
        assert_eq!(s.entries().collect::<Vec<_>>(), vec![(0, 3), (1, 7)]);
    }
}
