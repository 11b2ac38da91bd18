//! Shallow multi-instance multi-label lexical model.
//!
//! Each instance (a region feature vector) gets an independent sigmoid
//! probability per word; a bag of instances is positive for a word when at
//! least one instance is (noisy-OR). Training minimizes the bag-level
//! cross-entropy averaged over bags and summed over words.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Functional words dropped by the tokenizer.
pub const STOP_WORDS: [&str; 8] = ["is", "are", "at", "on", "in", "with", "and", "to"];

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Lowercase, split on non-alphanumerics, drop stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .collect()
}

/// Ordered lexical word list with index lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(Error::Vocabulary("vocabulary is empty".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token {w:?}")));
            }
        }
        Ok(Vocabulary { words, index })
    }

    /// Vocabulary of every distinct token in `captions`, in first-seen order.
    pub fn from_captions<S: AsRef<str>>(captions: &[S]) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut words = Vec::new();
        for c in captions {
            for t in tokenize(c.as_ref()) {
                if seen.insert(t.clone()) {
                    words.push(t);
                }
            }
        }
        Vocabulary::new(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Sorted, deduplicated vocabulary indices of the tokens in `text`.
    pub fn lexical_subset(&self, text: &str) -> Vec<usize> {
        let mut ids: Vec<usize> = tokenize(text).iter().filter_map(|t| self.get(t)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.words.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let words = Vec::<String>::deserialize(d)?;
        Vocabulary::new(words).map_err(serde::de::Error::custom)
    }
}

/// One sigmoid classifier per word: `P(w | x) = sigmoid(weights[w] . x + bias[w])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordModel {
    vocab_size: usize,
    dim: usize,
    /// Row-major `vocab_size x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl WordModel {
    pub fn new(vocab_size: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::Shape("word model needs V >= 1 and d >= 1".into()));
        }
        if weights.len() != vocab_size * dim || bias.len() != vocab_size {
            return Err(Error::Shape(format!(
                "expected {vocab_size}x{dim} weights and {vocab_size} biases, got {} and {}",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("word model has non-finite parameters".into()));
        }
        Ok(WordModel {
            vocab_size,
            dim,
            weights,
            bias,
        })
    }

    pub fn zeros(vocab_size: usize, dim: usize) -> Result<Self> {
        Self::new(
            vocab_size,
            dim,
            vec![0.0; vocab_size * dim],
            vec![0.0; vocab_size],
        )
    }

    /// Weights uniform in `[-0.01, 0.01]`, zero bias.
    pub fn init(vocab_size: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..vocab_size * dim)
            .map(|_| rng.gen_range(-0.01..=0.01))
            .collect();
        Self::new(vocab_size, dim, weights, vec![0.0; vocab_size])
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight_row(&self, word: usize) -> &[f64] {
        &self.weights[word * self.dim..(word + 1) * self.dim]
    }

    fn logit(&self, word: usize, x: &[f64]) -> f64 {
        dot(self.weight_row(word), x) + self.bias[word]
    }

    fn check_instance(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// A bag of instances sharing one label vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceBag {
    instances: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl InstanceBag {
    pub fn new(instances: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        let Some(first) = instances.first() else {
            return Err(Error::Precondition("instance bag is empty".into()));
        };
        let d = first.len();
        if instances.iter().any(|x| x.len() != d) {
            return Err(Error::Shape("instances of a bag differ in dimension".into()));
        }
        if instances.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("instance features must be finite".into()));
        }
        Ok(InstanceBag { instances, labels })
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn push(&mut self, instance: Vec<f64>) -> Result<()> {
        if instance.len() != self.instances[0].len() {
            return Err(Error::Shape("instance dimension differs from bag".into()));
        }
        self.instances.push(instance);
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-word probabilities of a single instance.
pub fn word_prob(model: &WordModel, instance: &[f64]) -> Result<Vec<f64>> {
    model.check_instance(instance)?;
    Ok((0..model.vocab_size)
        .map(|w| sigmoid(model.logit(w, instance)))
        .collect())
}

/// `prod_j (1 - p_j)` with the factors multiplied in sorted order, so the
/// result does not depend on instance order.
fn negative_product(mut factors: Vec<f64>) -> f64 {
    factors.sort_by(f64::total_cmp);
    factors.into_iter().product()
}

fn check_bag(model: &WordModel, bag: &InstanceBag) -> Result<()> {
    if bag.labels.len() != model.vocab_size {
        return Err(Error::Shape(format!(
            "bag has {} labels, model has {} words",
            bag.labels.len(),
            model.vocab_size
        )));
    }
    model.check_instance(&bag.instances[0])
}

/// Per-word logits of every instance, `[instance][word]`.
fn bag_logits(model: &WordModel, bag: &InstanceBag) -> Vec<Vec<f64>> {
    bag.instances
        .iter()
        .map(|x| (0..model.vocab_size).map(|w| model.logit(w, x)).collect())
        .collect()
}

/// Noisy-OR bag probability per word.
pub fn bag_prob(model: &WordModel, bag: &InstanceBag) -> Result<Vec<f64>> {
    check_bag(model, bag)?;
    let logits = bag_logits(model, bag);
    Ok((0..model.vocab_size)
        .map(|w| 1.0 - negative_product(logits.iter().map(|z| sigmoid(-z[w])).collect()))
        .collect())
}

fn check_bags(model: &WordModel, bags: &[InstanceBag]) -> Result<()> {
    if bags.is_empty() {
        return Err(Error::Precondition("need at least one bag".into()));
    }
    bags.iter().try_for_each(|b| check_bag(model, b))
}

fn cross_entropy(label: bool, p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Bag cross-entropy, summed over words and averaged over bags.
pub fn mimll_loss(model: &WordModel, bags: &[InstanceBag]) -> Result<f64> {
    check_bags(model, bags)?;
    let mut total = 0.0;
    for bag in bags {
        let probs = bag_prob(model, bag)?;
        total += probs
            .iter()
            .zip(&bag.labels)
            .map(|(&p, &y)| cross_entropy(y, p))
            .sum::<f64>();
    }
    Ok(total / bags.len() as f64)
}

/// Gradient of [`mimll_loss`] with respect to the weight matrix and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    /// Row-major `V x d`, same layout as the model weights.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Analytic gradient of [`mimll_loss`].
///
/// With `q = prod_j (1 - s_j)` and `p = 1 - q`, the derivative with respect to
/// instance logit `z_j` is `(1/N) * s_j * (1 - y * q / p)`. Terms whose bag
/// probability lies inside the clamp band have zero derivative.
pub fn loss_gradient(model: &WordModel, bags: &[InstanceBag]) -> Result<Gradient> {
    check_bags(model, bags)?;
    let scale = 1.0 / bags.len() as f64;
    let d = model.dim;
    let mut grad = Gradient {
        weights: vec![0.0; model.weights.len()],
        bias: vec![0.0; model.vocab_size],
    };
    for bag in bags {
        let logits = bag_logits(model, bag);
        for w in 0..model.vocab_size {
            let q = negative_product(logits.iter().map(|z| sigmoid(-z[w])).collect());
            let p = 1.0 - q;
            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                continue;
            }
            let y = bag.labels[w];
            let row = &mut grad.weights[w * d..(w + 1) * d];
            for (x, z) in bag.instances.iter().zip(&logits) {
                let s = sigmoid(z[w]);
                let dz = if y { -s * q / p } else { s } * scale;
                grad.bias[w] += dz;
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += dz * xi;
                }
            }
        }
    }
    Ok(grad)
}

/// Gradient-descent settings for [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub step_size: f64,
    pub epochs: usize,
    /// `None` trains full-batch; otherwise bags are shuffled each epoch and
    /// visited in mini-batches of this size.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            step_size: 0.5,
            epochs: 100,
            batch_size: None,
            seed: 0,
        }
    }
}

/// Plain gradient descent. Returns the trained model and the loss over all
/// bags measured after every epoch.
pub fn train(
    model: &WordModel,
    bags: &[InstanceBag],
    config: &TrainConfig,
) -> Result<(WordModel, Vec<f64>)> {
    if config.epochs == 0 {
        return Err(Error::Parameter("epochs must be at least 1".into()));
    }
    if !(config.step_size >= 0.0 && config.step_size.is_finite()) {
        return Err(Error::Parameter(format!(
            "step size must be finite and non-negative, got {}",
            config.step_size
        )));
    }
    if config.batch_size == Some(0) {
        return Err(Error::Parameter("batch size must be positive".into()));
    }
    check_bags(model, bags)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = model.clone();
    let mut order: Vec<usize> = (0..bags.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let batch = config.batch_size.unwrap_or(bags.len()).min(bags.len());
        if config.batch_size.is_some() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let subset: Vec<InstanceBag> = chunk.iter().map(|&i| bags[i].clone()).collect();
            let grad = loss_gradient(&model, &subset)?;
            for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
                *w -= config.step_size * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
                *b -= config.step_size * g;
            }
        }
        let loss = mimll_loss(&model, bags)?;
        let params_finite = model.weights.iter().chain(&model.bias).all(|v| v.is_finite());
        if !loss.is_finite() || !params_finite {
            return Err(Error::Divergence { epoch, loss });
        }
        trace.push(loss);
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(instances: Vec<Vec<f64>>, labels: Vec<bool>) -> InstanceBag {
        InstanceBag::new(instances, labels).unwrap()
    }

    #[test]
    fn tokenizer_drops_stop_words_and_punctuation() {
        assert_eq!(
            tokenize("A man is Surfing, on the waves!"),
            vec!["a", "man", "surfing", "the", "waves"]
        );
    }

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(Vocabulary::new(Vec::<String>::new()).is_err());
        assert!(Vocabulary::new(["a", "b", "a"]).is_err());
        let v = Vocabulary::new(["man", "dog"]).unwrap();
        assert_eq!(v.get("dog"), Some(1));
        assert_eq!(v.word(0), Some("man"));
        assert_eq!(v.lexical_subset("the dog and the man, dog"), vec![0, 1]);
    }

    #[test]
    fn word_prob_examples() {
        let m = WordModel::zeros(3, 4).unwrap();
        assert_eq!(word_prob(&m, &[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.5; 3]);

        let m = WordModel::new(1, 2, vec![1.0, 0.0], vec![0.0]).unwrap();
        assert_eq!(word_prob(&m, &[0.0, 5.0]).unwrap(), vec![0.5]);

        let m = WordModel::new(1, 1, vec![2.0], vec![-1.0]).unwrap();
        let p = word_prob(&m, &[1.0]).unwrap()[0];
        assert!((p - 0.731_058_578_630_004_9).abs() < 1e-15);

        assert!(matches!(word_prob(&m, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn bag_prob_examples() {
        let m = WordModel::zeros(1, 1).unwrap();
        let b = bag(vec![vec![0.3], vec![-1.0]], vec![true]);
        assert_eq!(bag_prob(&m, &b).unwrap(), vec![0.75]);

        // logits chosen so the instance probabilities are 0.1, 0.2, 0.3
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let m = WordModel::new(1, 1, vec![1.0], vec![0.0]).unwrap();
        let b = bag(
            vec![vec![logit(0.1)], vec![logit(0.2)], vec![logit(0.3)]],
            vec![true],
        );
        assert!((bag_prob(&m, &b).unwrap()[0] - 0.496).abs() < 1e-12);

        let m = WordModel::new(2, 2, vec![0.3, -0.7, 1.1, 0.2], vec![0.1, -0.4]).unwrap();
        let x = vec![0.8, -0.3];
        let single = bag_prob(&m, &bag(vec![x.clone()], vec![false, true])).unwrap();
        for (a, b) in single.iter().zip(word_prob(&m, &x).unwrap()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_bag_is_rejected() {
        assert!(matches!(
            InstanceBag::new(vec![], vec![true]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn loss_at_one_half_is_ln2_for_both_labels() {
        let m = WordModel::zeros(1, 1).unwrap();
        for y in [true, false] {
            let l = mimll_loss(&m, &[bag(vec![vec![1.0]], vec![y])]).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_negative_word_has_near_zero_gradient() {
        let m = WordModel::new(2, 1, vec![0.0, 0.0], vec![0.0, -30.0]).unwrap();
        let bags = [
            bag(vec![vec![1.0], vec![2.0]], vec![true, false]),
            bag(vec![vec![-1.0]], vec![false, false]),
        ];
        let g = loss_gradient(&m, &bags).unwrap();
        assert!(g.bias[1].abs() < 1e-12);
        assert!(g.weights[1].abs() < 1e-12);
        assert!(g.bias[0].abs() > 1e-3);
    }

    #[test]
    fn gradient_rows_are_separable_per_word() {
        let m = WordModel::new(2, 2, vec![0.3, -0.7, 1.1, 0.2], vec![0.1, -0.4]).unwrap();
        let bags = [
            bag(vec![vec![0.5, 1.0], vec![-0.2, 0.4]], vec![true, false]),
            bag(vec![vec![1.5, -1.0]], vec![false, true]),
        ];
        let base = loss_gradient(&m, &bags).unwrap();
        let mut bias = m.bias().to_vec();
        bias[0] += 0.37;
        let moved = WordModel::new(2, 2, m.weights().to_vec(), bias).unwrap();
        let g = loss_gradient(&moved, &bags).unwrap();
        assert_eq!(g.weights[2..], base.weights[2..]);
        assert_eq!(g.bias[1], base.bias[1]);
        assert_ne!(g.bias[0], base.bias[0]);
    }

    #[test]
    fn train_rejects_zero_epochs_and_noop_step() {
        let m = WordModel::init(2, 2, 3).unwrap();
        let bags = [bag(vec![vec![1.0, 0.0]], vec![true, false])];
        let cfg = TrainConfig {
            step_size: 0.0,
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&m, &bags, &cfg), Err(Error::Parameter(_))));

        let cfg = TrainConfig { epochs: 1, ..cfg };
        let (out, trace) = train(&m, &bags, &cfg).unwrap();
        assert_eq!(out, m);
        assert_eq!(trace, vec![mimll_loss(&m, &bags).unwrap()]);
    }

    #[test]
    fn train_fits_separable_toy_set() {
        let m = WordModel::init(2, 2, 11).unwrap();
        let bags = [
            bag(vec![vec![1.0, 0.0]], vec![true, false]),
            bag(vec![vec![0.0, 1.0]], vec![false, true]),
        ];
        let cfg = TrainConfig {
            step_size: 0.5,
            epochs: 500,
            batch_size: None,
            seed: 1,
        };
        let (model, trace) = train(&m, &bags, &cfg).unwrap();
        assert_eq!(trace.len(), 500);
        assert!(*trace.last().unwrap() < 0.1, "final loss {}", trace.last().unwrap());
        assert!(model.weights().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn train_is_deterministic_per_seed() {
        let m = WordModel::init(3, 2, 5).unwrap();
        let bags: Vec<_> = (0..6)
            .map(|i| {
                let x = i as f64 / 3.0 - 1.0;
                bag(vec![vec![x, 1.0 - x], vec![-x, 0.5]], vec![i % 2 == 0, i % 3 == 0, true])
            })
            .collect();
        let cfg = TrainConfig {
            step_size: 0.3,
            epochs: 20,
            batch_size: Some(2),
            seed: 9,
        };
        let (_, a) = train(&m, &bags, &cfg).unwrap();
        let (_, b) = train(&m, &bags, &cfg).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn huge_step_reports_divergence_epoch() {
        let m = WordModel::zeros(1, 1).unwrap();
        let bags = [bag(vec![vec![1e300]], vec![true])];
        let cfg = TrainConfig {
            step_size: 1e300,
            epochs: 3,
            batch_size: None,
            seed: 0,
        };
        assert!(matches!(train(&m, &bags, &cfg), Err(Error::Divergence { epoch: 0, .. })));
    }
}
