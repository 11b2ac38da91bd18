//! Exhaustive search over every neighborhood-feasible sequence.

use serde::{Deserialize, Serialize};

use crate::grid::GridShape;
use crate::selector::{feasible_candidates, RegionSequence};
use crate::submodular::SequenceObjective;
use crate::{Error, Result};

pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Number of feasible sequences over `frames` frames, saturating at `u128::MAX`.
pub fn count_feasible(grid: GridShape, frames: usize) -> Result<u128> {
    if frames == 0 {
        return Ok(0);
    }
    let neighbors = (0..grid.len())
        .map(|g| grid.neighborhood(g))
        .collect::<Result<Vec<_>>>()?;
    let mut ending = vec![1u128; grid.len()];
    for _ in 1..frames {
        ending = (0..grid.len())
            .map(|g| {
                neighbors[g]
                    .iter()
                    .fold(0u128, |acc, &h| acc.saturating_add(ending[h]))
            })
            .collect();
    }
    Ok(ending.iter().fold(0u128, |acc, &c| acc.saturating_add(c)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub sequence: RegionSequence,
    pub value: f64,
    /// Feasible sequences enumerated.
    pub count: u128,
}

/// Exact maximizer of the objective; ties go to the lexicographically first
/// sequence. Refuses spaces above [`ORACLE_LIMIT`].
pub fn oracle_search(objective: &SequenceObjective, existing: &[Vec<f64>]) -> Result<OracleSolution> {
    oracle_search_with_limit(objective, existing, ORACLE_LIMIT)
}

pub fn oracle_search_with_limit(
    objective: &SequenceObjective,
    existing: &[Vec<f64>],
    limit: u128,
) -> Result<OracleSolution> {
    let grid = objective.grid();
    let frames = objective.frames();
    let count = count_feasible(grid, frames)?;
    if count > limit {
        return Err(Error::SpaceTooLarge { count, limit });
    }
    let mut cells = Vec::with_capacity(frames);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut visited = 0u128;
    dfs(objective, existing, &mut cells, &mut best, &mut visited)?;
    debug_assert_eq!(visited, count);
    let (cells, value) = best.ok_or_else(|| Error::EmptyInput("video has no frames".into()))?;
    Ok(OracleSolution {
        sequence: RegionSequence::new(grid, cells)?,
        value,
        count: visited,
    })
}

fn dfs(
    objective: &SequenceObjective,
    existing: &[Vec<f64>],
    cells: &mut Vec<usize>,
    best: &mut Option<(Vec<usize>, f64)>,
    visited: &mut u128,
) -> Result<()> {
    if cells.len() == objective.frames() {
        *visited += 1;
        // same evaluation path as the greedy selectors, so equal sequences
        // get bit-identical values
        let value = objective.evaluate_value(cells, existing)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            *best = Some((cells.clone(), value));
        }
        return Ok(());
    }
    for cell in feasible_candidates(objective.grid(), cells.last().copied())? {
        cells.push(cell);
        dfs(objective, existing, cells, best, visited)?;
        cells.pop();
    }
    Ok(())
}
