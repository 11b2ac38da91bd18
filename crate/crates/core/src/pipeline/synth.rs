//! Seeded synthetic bundles.
//!
//! All generated values are exactly representable as f32, so a generated
//! bundle survives the binary format bit-for-bit. Feature vectors are
//! dyadic: four entries of ±1/2 (or a single ±1 when the dimension is
//! below four), which keeps their norm exactly 1 in both precisions.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bundle::{Caption, VideoBundle};
use super::rank::CategoryScoreTable;
use crate::grid::GridShape;
use crate::lexmodel::Vocabulary;
use crate::submodular::{LexicalProbMap, RegionFeatureMap};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Uniform probabilities, random features and captions.
    #[default]
    Random,
    /// Left and right grid halves carry disjoint word groups and feature
    /// subspaces; captions alternate between the two groups.
    TwoCluster,
    /// Random tensors with a caption set built from a few repeated templates.
    Redundant,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Random => "random",
            SynthKind::TwoCluster => "two-cluster",
            SynthKind::Redundant => "redundant",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub vocab: usize,
    pub dim: usize,
    pub captions: usize,
    pub categories: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Random,
            frames: 8,
            rows: 4,
            cols: 4,
            vocab: 12,
            dim: 8,
            captions: 6,
            categories: 3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("frames", self.frames),
            ("rows", self.rows),
            ("cols", self.cols),
            ("vocab", self.vocab),
            ("dim", self.dim),
            ("captions", self.captions),
            ("categories", self.categories),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("synthetic {name} must be positive")));
        }
        if self.kind == SynthKind::TwoCluster && (self.cols < 2 || self.vocab < 2 || self.dim < 2) {
            return Err(Error::Parameter(
                "two-cluster fixtures need at least 2 grid columns, words and feature dimensions".into(),
            ));
        }
        Ok(())
    }
}

fn f32_exact(x: f64) -> f64 {
    x as f32 as f64
}

/// Unit vector supported on `coords` (a slice of dimension indices).
fn dyadic_unit(rng: &mut ChaCha8Rng, dim: usize, coords: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    let (count, magnitude) = if coords.len() >= 4 { (4, 0.5) } else { (1, 1.0) };
    for i in sample(rng, coords.len(), count) {
        v[coords[i]] = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
    }
    v
}

fn caption_text(rng: &mut ChaCha8Rng, vocab: &Vocabulary, words: &[usize]) -> String {
    let len = rng.gen_range(2..=4).min(words.len());
    let mut picked: Vec<usize> = sample(rng, words.len(), len).into_iter().map(|i| words[i]).collect();
    picked.sort_unstable();
    let mut text = String::from("a");
    for w in picked {
        text.push(' ');
        text.push_str(&vocab.words()[w]);
    }
    text
}

/// Deterministic synthetic bundle for `seed`.
pub fn synth_fixture(spec: &SynthSpec, seed: u64) -> Result<VideoBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GridShape::new(spec.rows, spec.cols)?;
    let (v, d) = (spec.vocab, spec.dim);
    let vocabulary = Vocabulary::new((0..v).map(|i| format!("w{i}")))?;
    let half_v = v / 2;
    let half_d = d / 2;
    let left = |g: usize| grid.coords(g).1 < spec.cols / 2;
    let all_dims: Vec<usize> = (0..d).collect();

    let mut probs = Vec::with_capacity(spec.frames * grid.len() * v);
    let mut feats = Vec::with_capacity(spec.frames * grid.len() * d);
    for _t in 0..spec.frames {
        for g in 0..grid.len() {
            match spec.kind {
                SynthKind::TwoCluster => {
                    let own = if left(g) { 0..half_v } else { half_v..v };
                    for w in 0..v {
                        let p = if own.contains(&w) {
                            rng.gen_range(0.6..1.0)
                        } else {
                            rng.gen_range(0.0..0.1)
                        };
                        probs.push(f32_exact(p));
                    }
                    let coords: Vec<usize> = if left(g) { (0..half_d).collect() } else { (half_d..d).collect() };
                    feats.extend(dyadic_unit(&mut rng, d, &coords));
                }
                SynthKind::Random | SynthKind::Redundant => {
                    probs.extend((0..v).map(|_| f32_exact(rng.gen_range(0.0..1.0))));
                    feats.extend(dyadic_unit(&mut rng, d, &all_dims));
                }
            }
        }
    }
    let probmap = LexicalProbMap::new(grid, spec.frames, v, probs)?;
    let featmap = RegionFeatureMap::new(grid, spec.frames, d, feats)?;

    let all_words: Vec<usize> = (0..v).collect();
    let texts: Vec<String> = match spec.kind {
        SynthKind::Random => (0..spec.captions)
            .map(|_| caption_text(&mut rng, &vocabulary, &all_words))
            .collect(),
        SynthKind::TwoCluster => {
            let groups = [(0..half_v).collect::<Vec<_>>(), (half_v..v).collect::<Vec<_>>()];
            (0..spec.captions)
                .map(|i| caption_text(&mut rng, &vocabulary, &groups[i % 2]))
                .collect()
        }
        SynthKind::Redundant => {
            let templates: Vec<String> = (0..spec.captions.div_ceil(4).max(1))
                .map(|_| caption_text(&mut rng, &vocabulary, &all_words))
                .collect();
            (0..spec.captions).map(|i| templates[i % templates.len()].clone()).collect()
        }
    };
    let captions: Vec<Caption> = texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| Caption {
            id: format!("c{i}"),
            text,
        })
        .collect();

    let raw: Vec<f64> = (0..spec.categories).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let scores = CategoryScoreTable {
        categories: (0..spec.categories).map(|c| format!("k{c}")).collect(),
        prior: raw.iter().map(|r| r / total).collect(),
        sentences: captions.iter().map(|c| c.id.clone()).collect(),
        conditional: (0..captions.len())
            .map(|_| (0..spec.categories).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect(),
    };

    let bundle = VideoBundle {
        id: format!("{}-{seed}", spec.kind.name()),
        probmap,
        featmap,
        vocabulary: Some(vocabulary),
        captions: Some(captions),
        scores: Some(scores),
    };
    bundle.validate()?;
    Ok(bundle)
}
