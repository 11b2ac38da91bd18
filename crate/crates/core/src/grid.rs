//! Anchor-grid geometry: regions are cells of a `rows x cols` response map,
//! indexed row-major.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridShape {
    fn default() -> Self {
        GridShape { rows: 4, cols: 4 }
    }
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Parameter(format!(
                "grid must have at least one row and column, got {rows}x{cols}"
            )));
        }
        Ok(GridShape { rows, cols })
    }

    /// Number of regions per frame.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, region: usize) -> Result<()> {
        if region >= self.len() {
            return Err(Error::Bounds {
                region,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// `(row, col)` of a region index.
    pub fn coords(&self, region: usize) -> (usize, usize) {
        (region / self.cols, region % self.cols)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// The 3x3 neighborhood of `region` (including itself), clipped at the
    /// borders, in ascending index order.
    pub fn neighborhood(&self, region: usize) -> Result<Vec<usize>> {
        self.check(region)?;
        let (r, c) = self.coords(region);
        let rows = r.saturating_sub(1)..=(r + 1).min(self.rows - 1);
        let mut out = Vec::with_capacity(9);
        for row in rows {
            for col in c.saturating_sub(1)..=(c + 1).min(self.cols - 1) {
                out.push(self.index(row, col));
            }
        }
        Ok(out)
    }

    /// True when `a` and `b` are equal or touch (8-connectivity).
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) <= 1 && ca.abs_diff(cb) <= 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighborhood_sizes_on_default_grid() {
        let g = GridShape::default();
        assert_eq!(g.neighborhood(0).unwrap(), vec![0, 1, 4, 5]);
        assert_eq!(g.neighborhood(g.index(1, 1)).unwrap().len(), 9);
        assert_eq!(g.neighborhood(g.index(0, 2)).unwrap().len(), 6);
        assert_eq!(g.neighborhood(15).unwrap(), vec![10, 11, 14, 15]);
        assert!(g.neighborhood(16).is_err());
    }

    #[test]
    fn adjacency_matches_neighborhood() {
        let g = GridShape::new(3, 5).unwrap();
        for a in 0..g.len() {
            let n = g.neighborhood(a).unwrap();
            for b in 0..g.len() {
                assert_eq!(g.adjacent(a, b), n.contains(&b));
            }
        }
    }
}
