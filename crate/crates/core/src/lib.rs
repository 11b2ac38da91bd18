//! Region-sequence selection for weakly supervised dense video captioning.
//!
//! Given per-region word probabilities and region features for a clip, the
//! crate picks several informative, coherent and diverse region-sequences by
//! greedy / lazy-greedy submodular maximization, associates caption sentences
//! to those sequences winner-takes-all, learns the objective weights from
//! video-level sentences only, and scores the diversity of caption sets.
//!
//! Module map:
//!
//! - [`lexmodel`]: vocabulary, sigmoid word model, noisy-OR bags, multi-instance
//!   multi-label loss and its gradient, gradient-descent trainer.
//! - [`submodular`]: informativeness, coherence and diversity terms and their
//!   weighted, incrementally evaluated combination.
//! - [`selector`]: greedy and CELF selection on the region grid, multi-sequence
//!   generation, sentence association and hinge-loss weight learning.
//! - [`diversity`]: bag-of-words, truncated SVD (LSA), caption diversity and
//!   caption clustering.
//! - [`pipeline`]: file formats, configuration, exhaustive oracle, category
//!   re-ranking, proxy captions and synthetic fixtures.

pub mod diversity;
mod error;
pub mod grid;
pub mod lexmodel;
pub mod pipeline;
pub mod selector;
pub mod submodular;

pub use error::{Error, Result};
pub use grid::GridShape;
