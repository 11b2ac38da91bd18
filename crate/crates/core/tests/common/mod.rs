//! Instance generators and independent reference implementations shared by
//! the integration targets. Nothing here calls the library's scoring code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqsel::submodular::{LexicalProbMap, RegionFeatureMap};
use seqsel::GridShape;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain-array description of an instance.
#[derive(Clone, Debug)]
pub struct Raw {
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub vocab: usize,
    pub dim: usize,
    /// `[frame][region][word]` flattened.
    pub probs: Vec<f64>,
    /// `[frame][region][dim]` flattened, unit rows.
    pub feats: Vec<f64>,
}

impl Raw {
    pub fn regions(&self) -> usize {
        self.rows * self.cols
    }

    pub fn p(&self, t: usize, g: usize, w: usize) -> f64 {
        self.probs[(t * self.regions() + g) * self.vocab + w]
    }

    pub fn maps(&self) -> (LexicalProbMap, RegionFeatureMap) {
        let grid = GridShape::new(self.rows, self.cols).unwrap();
        (
            LexicalProbMap::new(grid, self.frames, self.vocab, self.probs.clone()).unwrap(),
            RegionFeatureMap::new(grid, self.frames, self.dim, self.feats.clone()).unwrap(),
        )
    }
}

pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_raw(rng: &mut ChaCha8Rng, frames: usize, rows: usize, cols: usize, vocab: usize, dim: usize) -> Raw {
    let g = rows * cols;
    let probs = (0..frames * g * vocab).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut feats = Vec::with_capacity(frames * g * dim);
    for _ in 0..frames * g {
        feats.extend(unit_vector(rng, dim));
    }
    Raw {
        frames,
        rows,
        cols,
        vocab,
        dim,
        probs,
        feats,
    }
}

/// Random small instance: T ≤ max_t, G ≤ max_g, V ≤ max_v.
pub fn random_small(rng: &mut ChaCha8Rng, max_t: usize, max_g: usize, max_v: usize) -> Raw {
    let frames = rng.gen_range(1..=max_t);
    let (rows, cols) = loop {
        let r = rng.gen_range(1..=max_g);
        let c = rng.gen_range(1..=max_g);
        if r * c <= max_g {
            break (r, c);
        }
    };
    let vocab = rng.gen_range(1..=max_v);
    let dim = rng.gen_range(2..=4);
    random_raw(rng, frames, rows, cols, vocab, dim)
}

/// 8-connected adjacency (a cell is adjacent to itself).
pub fn adjacent(cols: usize, a: usize, b: usize) -> bool {
    let (ra, ca) = ((a / cols) as i64, (a % cols) as i64);
    let (rb, cb) = ((b / cols) as i64, (b % cols) as i64);
    (ra - rb).abs() <= 1 && (ca - cb).abs() <= 1
}

/// Every feasible sequence, in lexicographic order.
pub fn all_sequences(raw: &Raw) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(raw: &Raw, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == raw.frames {
            out.push(cur.clone());
            return;
        }
        for g in 0..raw.regions() {
            if cur.last().is_none_or(|&prev| adjacent(raw.cols, prev, g)) {
                cur.push(g);
                rec(raw, cur, out);
                cur.pop();
            }
        }
    }
    rec(raw, &mut cur, &mut out);
    out
}

/// `Σ_w max over (frame, region) in the set`; 0 for the empty set.
pub fn finf_set(raw: &Raw, set: &[(usize, usize)]) -> f64 {
    (0..raw.vocab)
        .map(|w| set.iter().map(|&(t, g)| raw.p(t, g, w)).fold(0.0, f64::max))
        .sum()
}

pub fn finf_sequence(raw: &Raw, seq: &[usize]) -> f64 {
    let set: Vec<(usize, usize)> = seq.iter().enumerate().map(|(t, &g)| (t, g)).collect();
    finf_set(raw, &set)
}

/// Exhaustive f_inf optimum (value only).
pub fn brute_force_finf(raw: &Raw) -> f64 {
    all_sequences(raw)
        .iter()
        .map(|s| finf_sequence(raw, s))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Reference MIMLL loss with the same clamp, written independently.
pub fn reference_loss(v: usize, d: usize, weights: &[f64], bias: &[f64], bags: &[(Vec<Vec<f64>>, Vec<bool>)]) -> f64 {
    let mut total = 0.0;
    for (instances, labels) in bags {
        for w in 0..v {
            let mut q = 1.0;
            for x in instances {
                let z: f64 = (0..d).map(|k| weights[w * d + k] * x[k]).sum::<f64>() + bias[w];
                q *= 1.0 - sigmoid(z);
            }
            let p = (1.0 - q).clamp(1e-12, 1.0 - 1e-12);
            total += if labels[w] { -p.ln() } else { -(1.0 - p).ln() };
        }
    }
    total / bags.len() as f64
}
