//! Caption-set diversity via latent semantic analysis.
//!
//! Captions become bag-of-words columns of a term-by-sentence count matrix,
//! a rank-k truncated SVD of that matrix (computed by orthogonal iteration)
//! gives each caption a dense latent vector, and the diversity of a set is the
//! mean `1 - cosine` over caption pairs. Redundant caption sets are reduced by
//! spherical k-means on the latent vectors.

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lexmodel::{tokenize, Vocabulary};
use crate::{Error, Result};

/// Default cap on the LSA rank.
pub const DEFAULT_LSA_RANK: usize = 20;

/// Iteration cap of the orthogonal iteration.
pub const MAX_SVD_ITERATIONS: usize = 10_000;

/// k-means iteration cap.
pub const MAX_KMEANS_ITERATIONS: usize = 100;

const OVERSAMPLING: usize = 5;

/// Term-by-sentence count matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BowMatrix {
    counts: DMatrix<f64>,
    /// Sentences with no in-vocabulary token.
    empty: Vec<usize>,
}

impl BowMatrix {
    pub fn terms(&self) -> usize {
        self.counts.nrows()
    }

    pub fn sentences(&self) -> usize {
        self.counts.ncols()
    }

    pub fn count(&self, term: usize, sentence: usize) -> u32 {
        self.counts[(term, sentence)] as u32
    }

    pub fn column(&self, sentence: usize) -> Vec<f64> {
        self.counts.column(sentence).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.counts
    }

    /// Indices of sentences whose column is all zero.
    pub fn empty_sentences(&self) -> &[usize] {
        &self.empty
    }
}

/// Counts vocabulary tokens per caption; out-of-vocabulary tokens are dropped.
pub fn build_bow<S: AsRef<str>>(captions: &[S], vocab: &Vocabulary) -> Result<BowMatrix> {
    let mut counts = DMatrix::zeros(vocab.len(), captions.len());
    let mut empty = Vec::new();
    for (j, caption) in captions.iter().enumerate() {
        let mut any = false;
        for token in tokenize(caption.as_ref()) {
            if let Some(i) = vocab.get(&token) {
                counts[(i, j)] += 1.0;
                any = true;
            }
        }
        if !any {
            empty.push(j);
        }
    }
    if captions.is_empty() || empty.len() == captions.len() {
        return Err(Error::EmptyInput(
            "no caption contains an in-vocabulary token".into(),
        ));
    }
    Ok(BowMatrix { counts, empty })
}

/// Rank-k truncated SVD `A ≈ U Σ Vᵀ` of a count matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LsaSpace {
    /// `terms x k`, orthonormal columns.
    left: DMatrix<f64>,
    /// Descending, nonnegative.
    singular: Vec<f64>,
    /// `k x sentences`: `Σ⁻¹ Uᵀ A` (directions with zero singular value dropped).
    projections: DMatrix<f64>,
    /// Singular values at or below this count as zero.
    cutoff: f64,
}

impl LsaSpace {
    pub fn rank(&self) -> usize {
        self.singular.len()
    }

    pub fn terms(&self) -> usize {
        self.left.nrows()
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    pub fn projections(&self) -> &DMatrix<f64> {
        &self.projections
    }

    /// Number of singular values above the numerical-zero cutoff.
    pub fn numerical_rank(&self) -> usize {
        self.singular.iter().filter(|&&s| s > self.cutoff).count()
    }

    /// Keeps the leading `k` directions.
    pub fn truncate(&self, k: usize) -> Result<LsaSpace> {
        if k == 0 || k > self.rank() {
            return Err(Error::Parameter(format!(
                "cannot truncate rank {} space to {k}",
                self.rank()
            )));
        }
        Ok(LsaSpace {
            left: self.left.columns(0, k).into_owned(),
            singular: self.singular[..k].to_vec(),
            projections: self.projections.rows(0, k).into_owned(),
            cutoff: self.cutoff,
        })
    }

    fn check_column(&self, column: &[f64]) -> Result<()> {
        if column.len() != self.terms() {
            return Err(Error::Shape(format!(
                "column has {} terms, space has {}",
                column.len(),
                self.terms()
            )));
        }
        if column.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("column has non-finite entries".into()));
        }
        Ok(())
    }

    /// `Uᵀx` with zero-singular-value directions dropped: the latent
    /// coordinates scaled by their singular values.
    pub fn embed(&self, column: &[f64]) -> Result<Vec<f64>> {
        self.check_column(column)?;
        let x = DVector::from_column_slice(column);
        let ut_x = self.left.tr_mul(&x);
        Ok(ut_x
            .iter()
            .zip(&self.singular)
            .map(|(&v, &s)| if s > self.cutoff { v } else { 0.0 })
            .collect())
    }
}

/// Fold-in projection `Σ⁻¹ Uᵀ x`; directions with zero singular value map to 0.
pub fn lsa_project(space: &LsaSpace, column: &[f64]) -> Result<Vec<f64>> {
    Ok(space
        .embed(column)?
        .into_iter()
        .zip(&space.singular)
        .map(|(v, &s)| if s > space.cutoff { v / s } else { 0.0 })
        .collect())
}

/// Orthonormalizes the columns of `m` in place by modified Gram-Schmidt
/// (two passes). A column that collapses is replaced by the standard basis
/// vector with the largest component orthogonal to the columns before it
/// (at least `1/sqrt(rows)` in norm, so the replacement never collapses).
fn orthonormalize(m: &mut DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let project_out = |m: &DMatrix<f64>, j: usize, mut x: DVector<f64>| {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&x);
                x.axpy(-proj, &m.column(i), 1.0);
            }
        }
        x
    };
    for j in 0..cols {
        let x = project_out(m, j, m.column(j).clone_owned());
        let norm = x.norm();
        if norm > 1e-12 * scale {
            m.set_column(j, &(x / norm));
            continue;
        }
        let v = (0..rows)
            .map(|r| project_out(m, j, DVector::from_fn(rows, |i, _| if i == r { 1.0 } else { 0.0 })))
            .reduce(|a, b| if b.norm() > a.norm() { b } else { a })
            .expect("non-empty basis");
        let n = v.norm();
        m.set_column(j, &(v / n));
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order with matching
/// eigenvector columns.
fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::identity(n, n);
    let total = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Rank-`k` truncated SVD by orthogonal iteration on `A Aᵀ` with a
/// Rayleigh-Ritz step per iteration, started from a seeded random block.
pub fn lsa_fit(bow: &BowMatrix, k: usize, seed: u64) -> Result<LsaSpace> {
    let a = bow.matrix();
    let (terms, sentences) = a.shape();
    if k == 0 || k > terms.min(sentences) {
        return Err(Error::Parameter(format!(
            "rank {k} outside 1..={}",
            terms.min(sentences)
        )));
    }
    let block = (k + OVERSAMPLING).min(terms);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::from_fn(terms, block, |_, _| rng.gen_range(-1.0..1.0));
    orthonormalize(&mut q);

    let mut values = vec![f64::INFINITY; block];
    let mut converged = false;
    for _ in 0..MAX_SVD_ITERATIONS {
        let mut z = a * (a.tr_mul(&q));
        orthonormalize(&mut z);
        let b = a.tr_mul(&z);
        let (ritz, rot) = jacobi_eigen(b.tr_mul(&b));
        q = z * rot;

        let top = ritz[0].abs().max(f64::MIN_POSITIVE);
        let settled = ritz
            .iter()
            .zip(&values)
            .take(k)
            .all(|(new, old)| (new - old).abs() <= 1e-14 * top);
        values = ritz;
        if settled {
            let aq = a * a.tr_mul(&q.columns(0, k));
            let residual = (0..k)
                .map(|i| (aq.column(i) - q.column(i) * values[i]).norm())
                .fold(0.0, f64::max);
            if residual <= 1e-10 * top {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Convergence {
            iterations: MAX_SVD_ITERATIONS,
        });
    }
    let singular: Vec<f64> = values[..k].iter().map(|&l| l.max(0.0).sqrt()).collect();
    let cutoff = 1e-10 * singular[0].max(1.0);
    let left = q.columns(0, k).into_owned();
    let projections = DMatrix::from_fn(k, sentences, |i, j| {
        if singular[i] > cutoff {
            left.column(i).dot(&a.column(j)) / singular[i]
        } else {
            0.0
        }
    });
    Ok(LsaSpace {
        left,
        singular,
        projections,
        cutoff,
    })
}

/// Normalization of the pairwise dissimilarity sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairNormalization {
    /// Mean over the `n(n-1)/2` unordered pairs; scores lie in `[0, 2]`.
    #[default]
    UnorderedPairs,
    /// Sum over ordered pairs `i != j` divided by `n`.
    PerCaption,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    c.clamp(-1.0, 1.0)
}

/// Normalized sum of `1 - cos` over caption pairs; pairs involving a zero
/// vector contribute 1.
pub fn pairwise_diversity(vectors: &[Vec<f64>], normalization: PairNormalization) -> Result<f64> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 captions, got {n}")));
    }
    let mut sum = 0.0;
    for j in 1..n {
        for i in 0..j {
            sum += 1.0 - cosine(&vectors[i], &vectors[j]);
        }
    }
    Ok(match normalization {
        PairNormalization::UnorderedPairs => sum / (n * (n - 1) / 2) as f64,
        PairNormalization::PerCaption => 2.0 * sum / n as f64,
    })
}

/// Fits an LSA space on `captions` and returns the latent vectors of every
/// caption. `k = None` uses `min(20, numerical rank)`.
pub fn caption_vectors<S: AsRef<str>>(
    captions: &[S],
    vocab: &Vocabulary,
    k: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    let bow = build_bow(captions, vocab)?;
    let space = fit_default(&bow, k)?;
    (0..bow.sentences()).map(|j| space.embed(&bow.column(j))).collect()
}

fn fit_default(bow: &BowMatrix, k: Option<usize>) -> Result<LsaSpace> {
    let full = bow.terms().min(bow.sentences());
    match k {
        Some(k) => lsa_fit(bow, k, 0),
        None => {
            let space = lsa_fit(bow, DEFAULT_LSA_RANK.min(full), 0)?;
            space.truncate(space.numerical_rank().clamp(1, DEFAULT_LSA_RANK))
        }
    }
}

/// Diversity of a caption set: mean `1 - cosine` between LSA vectors.
pub fn diversity_score<S: AsRef<str>>(
    captions: &[S],
    vocab: &Vocabulary,
    k: Option<usize>,
    normalization: PairNormalization,
) -> Result<f64> {
    if captions.len() < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 captions, got {}",
            captions.len()
        )));
    }
    pairwise_diversity(&caption_vectors(captions, vocab, k)?, normalization)
}

/// Diversity of captions embedded in an already fitted space (corpus-level LSA).
pub fn diversity_in_space<S: AsRef<str>>(
    space: &LsaSpace,
    captions: &[S],
    vocab: &Vocabulary,
    normalization: PairNormalization,
) -> Result<f64> {
    let vectors = captions
        .iter()
        .map(|c| {
            let mut x = vec![0.0; vocab.len()];
            for t in tokenize(c.as_ref()) {
                if let Some(i) = vocab.get(&t) {
                    x[i] += 1.0;
                }
            }
            space.embed(&x)
        })
        .collect::<Result<Vec<_>>>()?;
    pairwise_diversity(&vectors, normalization)
}

/// Fits LSA over a whole corpus of captions.
pub fn fit_corpus<S: AsRef<str>>(captions: &[S], vocab: &Vocabulary, k: Option<usize>) -> Result<LsaSpace> {
    fit_default(&build_bow(captions, vocab)?, k)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionCluster {
    /// Caption indices, ascending.
    pub members: Vec<usize>,
    /// Member closest to the cluster centroid.
    pub representative: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Ordered by smallest member.
    pub clusters: Vec<CaptionCluster>,
    /// k-means objective `Σ (1 - cos(x, centroid))` after every assignment step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl Clustering {
    pub fn representatives(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.representative).collect()
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - cosine(a, b)
}

/// Spherical k-means (cosine distance) with seeded k-means++ initialization.
pub fn kmeans_cosine(vectors: &[Vec<f64>], n_clusters: usize, seed: u64) -> Result<Clustering> {
    let n = vectors.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::Parameter(format!(
            "cluster count {n_clusters} outside 1..={n}"
        )));
    }
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| unit(v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut chosen = vec![rng.gen_range(0..n)];
    while chosen.len() < n_clusters {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| {
                let d = chosen
                    .iter()
                    .map(|&c| distance(p, &points[c]))
                    .fold(f64::INFINITY, f64::min)
                    .max(0.0);
                d * d
            })
            .collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(&mut rng),
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                free[rng.gen_range(0..free.len())]
            }
        };
        chosen.push(next);
    }
    let mut centers: Vec<Vec<f64>> = chosen.iter().map(|&c| points[c].clone()).collect();

    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_KMEANS_ITERATIONS {
        iterations += 1;
        let next: Vec<usize> = points
            .iter()
            .map(|p| {
                let mut best = (0, f64::INFINITY);
                for (j, c) in centers.iter().enumerate() {
                    let d = distance(p, c);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                best.0
            })
            .collect();
        let mut next = next;
        // an empty cluster takes the point farthest from its own center
        for j in 0..n_clusters {
            if next.contains(&j) {
                continue;
            }
            let mut sizes = vec![0usize; n_clusters];
            next.iter().for_each(|&a| sizes[a] += 1);
            let donor = (0..n)
                .filter(|&i| sizes[next[i]] > 1)
                .max_by(|&a, &b| {
                    distance(&points[a], &centers[next[a]])
                        .total_cmp(&distance(&points[b], &centers[next[b]]))
                        .then(b.cmp(&a))
                })
                .ok_or_else(|| Error::Internal("no point to reseed an empty cluster".into()))?;
            next[donor] = j;
            centers[j] = points[donor].clone();
        }
        let objective: f64 = points
            .iter()
            .zip(&next)
            .map(|(p, &a)| distance(p, &centers[a]))
            .sum();
        trace.push(objective);
        let changed = next != assignment;
        assignment = next;
        if !changed {
            break;
        }
        for (j, center) in centers.iter_mut().enumerate() {
            let mut mean = vec![0.0; center.len()];
            for (p, _) in points.iter().zip(&assignment).filter(|(_, &a)| a == j) {
                mean.iter_mut().zip(p).for_each(|(m, x)| *m += x);
            }
            if mean.iter().any(|&v| v != 0.0) {
                *center = unit(&mean);
            }
        }
    }

    let mut clusters: Vec<CaptionCluster> = (0..n_clusters)
        .map(|j| {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == j).collect();
            let mut representative = members[0];
            let mut best = f64::NEG_INFINITY;
            for &m in &members {
                let c = cosine(&points[m], &centers[j]);
                if c > best {
                    best = c;
                    representative = m;
                }
            }
            CaptionCluster {
                members,
                representative,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.members[0]);
    Ok(Clustering {
        clusters,
        objective_trace: trace,
        iterations,
    })
}

/// Clusters captions on their LSA vectors.
pub fn cluster_captions<S: AsRef<str>>(
    captions: &[S],
    vocab: &Vocabulary,
    k_lsa: Option<usize>,
    n_clusters: usize,
    seed: u64,
) -> Result<Clustering> {
    if n_clusters == 0 || n_clusters > captions.len() {
        return Err(Error::Parameter(format!(
            "cluster count {n_clusters} outside 1..={}",
            captions.len()
        )));
    }
    kmeans_cosine(&caption_vectors(captions, vocab, k_lsa)?, n_clusters, seed)
}
