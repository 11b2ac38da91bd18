//! Category-aware sentence re-ranking: `argmax_s max_c P(s|c) P(c)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PRIOR_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryScoreTable {
    pub categories: Vec<String>,
    /// `P(c | video)` per category.
    pub prior: Vec<f64>,
    pub sentences: Vec<String>,
    /// `conditional[s][c] = P(s | c, video)`.
    pub conditional: Vec<Vec<f64>>,
}

impl CategoryScoreTable {
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() || self.sentences.is_empty() {
            return Err(Error::Parameter("score table has no categories or no sentences".into()));
        }
        if self.prior.len() != self.categories.len() {
            return Err(Error::Shape(format!(
                "{} prior entries for {} categories",
                self.prior.len(),
                self.categories.len()
            )));
        }
        if self.conditional.len() != self.sentences.len() {
            return Err(Error::Shape(format!(
                "{} conditional rows for {} sentences",
                self.conditional.len(),
                self.sentences.len()
            )));
        }
        if let Some((s, row)) = self
            .conditional
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != self.categories.len())
        {
            return Err(Error::Shape(format!(
                "sentence {s} has {} conditionals for {} categories",
                row.len(),
                self.categories.len()
            )));
        }
        let in_range = |v: &f64| (0.0..=1.0).contains(v);
        if !self.prior.iter().all(in_range) || !self.conditional.iter().flatten().all(in_range) {
            return Err(Error::Parameter("score table entries must lie in [0, 1]".into()));
        }
        let total: f64 = self.prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(Error::Parameter(format!("category prior sums to {total}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub sentence: String,
    pub index: usize,
    pub score: f64,
    /// `max_c P(s|c) P(c)` for every sentence.
    pub scores: Vec<f64>,
}

/// Best sentence under the category prior; ties go to the sentence listed
/// first.
pub fn map_rank(table: &CategoryScoreTable) -> Result<RankResult> {
    table.validate()?;
    let scores: Vec<f64> = table
        .conditional
        .iter()
        .map(|row| {
            row.iter()
                .zip(&table.prior)
                .map(|(p, c)| p * c)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(RankResult {
        sentence: table.sentences[best].clone(),
        index: best,
        score: scores[best],
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(prior: Vec<f64>, conditional: Vec<Vec<f64>>) -> CategoryScoreTable {
        CategoryScoreTable {
            categories: (0..prior.len()).map(|c| format!("c{c}")).collect(),
            prior,
            sentences: (0..conditional.len()).map(|s| format!("s{}", s + 1)).collect(),
            conditional,
        }
    }

    #[test]
    fn prior_changes_the_winner() {
        let r = map_rank(&table(vec![0.9, 0.1], vec![vec![0.5, 0.9], vec![0.6, 0.1]])).unwrap();
        assert_eq!(r.sentence, "s2");
        assert!((r.scores[0] - 0.45).abs() < 1e-15);
        assert!((r.scores[1] - 0.54).abs() < 1e-15);
    }

    #[test]
    fn single_category_is_conditional_argmax() {
        let r = map_rank(&table(vec![1.0], vec![vec![0.2], vec![0.7], vec![0.7]])).unwrap();
        assert_eq!(r.index, 1);
    }

    #[test]
    fn invalid_tables() {
        assert!(map_rank(&table(vec![0.5, 0.4], vec![vec![0.1, 0.1]])).is_err());
        assert!(map_rank(&table(vec![1.0], vec![])).is_err());
        assert!(map_rank(&table(vec![1.0], vec![vec![1.2]])).is_err());
    }
}
