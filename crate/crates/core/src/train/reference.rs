//! Multinomial logistic regression over hashed n-gram features, trained with
//! seeded mini-batch SGD.
//!
//! The objective is mean softmax cross-entropy plus `l2/2 · ‖W‖²` (biases are
//! not regularized). Weights are stored as `scale · V` so the L2 shrink of a
//! step costs O(1) instead of touching every weight; the sparse data term
//! then updates `V` divided by the current scale.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize, SparseVector};
use super::{ModelInfo, Predictor, TrainError, Trainer, TrainerConfig};
use crate::corpus::{LabelSet, LabeledDocument, SentimentLabel};

/// Dense parameters: `weights[class * dim + feature]` and one bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub dim: usize,
    pub classes: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Params {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        Params {
            dim,
            classes,
            weights: vec![0.0; dim * classes],
            bias: vec![0.0; classes],
        }
    }

    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        (0..self.classes)
            .map(|k| {
                let row = &self.weights[k * self.dim..(k + 1) * self.dim];
                self.bias[k] + x.iter().map(|(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    }
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|s| (s - lse).exp()).collect()
}

/// Cross-entropy of one example given its class scores.
fn example_loss(scores: &[f64], class: usize) -> f64 {
    log_sum_exp(scores) - scores[class]
}

/// `softmax(scores) − onehot(class)`.
fn residual(scores: &[f64], class: usize) -> Vec<f64> {
    let mut r = softmax(scores);
    r[class] -= 1.0;
    r
}

/// Regularized objective over a batch.
pub fn objective(params: &Params, batch: &[(SparseVector, usize)], l2: f64) -> f64 {
    let data: f64 = batch
        .iter()
        .map(|(x, y)| example_loss(&params.scores(x), *y))
        .sum::<f64>()
        / batch.len() as f64;
    let reg: f64 = params.weights.iter().map(|w| w * w).sum::<f64>();
    data + 0.5 * l2 * reg
}

/// Analytic gradient of [`objective`].
pub fn gradient(params: &Params, batch: &[(SparseVector, usize)], l2: f64) -> Params {
    let mut g = Params::zeros(params.dim, params.classes);
    let inv = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        let r = residual(&params.scores(x), *y);
        for (k, rk) in r.iter().enumerate() {
            g.bias[k] += inv * rk;
            for (j, v) in x.iter() {
                g.weights[k * params.dim + j] += inv * rk * v;
            }
        }
    }
    for (gw, w) in g.weights.iter_mut().zip(&params.weights) {
        *gw += l2 * w;
    }
    g
}

/// Loss after initialization and after each epoch, over the full training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub label_set: LabelSet,
    pub config: TrainerConfig,
    pub params: Params,
}

impl ReferenceModel {
    pub fn features(&self, text: &str) -> SparseVector {
        featurize(text, self.config.feature_dim, self.config.max_tokens)
    }

    /// Argmax of the class scores; ties go to the earliest label in the set.
    pub fn predict_features(&self, x: &SparseVector) -> SentimentLabel {
        let scores = self.params.scores(x);
        let mut best = 0;
        for (k, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = k;
            }
        }
        self.label_set.labels()[best]
    }

    pub fn predict_text(&self, text: &str) -> SentimentLabel {
        self.predict_features(&self.features(text))
    }

    /// Bit patterns of every parameter, for exact comparisons.
    pub fn parameter_bits(&self) -> Vec<u64> {
        self.params
            .weights
            .iter()
            .chain(&self.params.bias)
            .map(|v| v.to_bits())
            .collect()
    }

    pub fn parameter_count(&self) -> u64 {
        (self.params.dim * self.params.classes + self.params.classes) as u64
    }
}

/// Scaled-weights working state for SGD.
struct Sgd {
    params: Params,
    scale: f64,
}

impl Sgd {
    fn scores(&self, x: &SparseVector) -> Vec<f64> {
        let p = &self.params;
        (0..p.classes)
            .map(|k| {
                let row = &p.weights[k * p.dim..(k + 1) * p.dim];
                p.bias[k] + self.scale * x.iter().map(|(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    }

    fn step(&mut self, batch: &[&(SparseVector, usize)], lr: f64, l2: f64) {
        let residuals: Vec<Vec<f64>> = batch.iter().map(|(x, y)| residual(&self.scores(x), *y)).collect();
        self.scale *= 1.0 - lr * l2;
        let step = lr / batch.len() as f64;
        let dim = self.params.dim;
        for ((x, _), r) in batch.iter().zip(&residuals) {
            for (k, rk) in r.iter().enumerate() {
                self.params.bias[k] -= step * rk;
                let coef = step * rk / self.scale;
                for (j, v) in x.iter() {
                    self.params.weights[k * dim + j] -= coef * v;
                }
            }
        }
        if self.scale < 1e-6 {
            self.materialize();
        }
    }

    fn materialize(&mut self) {
        let s = self.scale;
        self.params.weights.iter_mut().for_each(|w| *w *= s);
        self.scale = 1.0;
    }

    /// `active` lists every feature index present in `data`; all other
    /// weights are still zero.
    fn loss(&self, data: &[(SparseVector, usize)], l2: f64, active: &[usize]) -> f64 {
        let ce = data.iter().map(|(x, y)| example_loss(&self.scores(x), *y)).sum::<f64>() / data.len() as f64;
        let p = &self.params;
        let sq: f64 = (0..p.classes)
            .flat_map(|k| active.iter().map(move |j| p.weights[k * p.dim + j]))
            .map(|w| w * w)
            .sum();
        ce + 0.5 * l2 * self.scale * self.scale * sq
    }
}

/// Trains the reference classifier.
///
/// Deterministic for a fixed document order and `config.seed`: the example
/// order is reshuffled each epoch from a ChaCha8 stream and batches are
/// applied in that order.
pub fn fit(
    train: &[LabeledDocument],
    label_set: &LabelSet,
    config: &TrainerConfig,
) -> Result<(ReferenceModel, FitTrace), TrainError> {
    config.validate()?;
    if config.feature_dim < label_set.len() {
        return Err(TrainError::InvalidConfig(
            "feature_dim must be at least the number of classes".into(),
        ));
    }
    if config.learning_rate * config.l2 >= 1.0 {
        return Err(TrainError::InvalidConfig("learning_rate * l2 must be < 1".into()));
    }
    let mut present = vec![false; label_set.len()];
    let mut data = Vec::with_capacity(train.len());
    for doc in train {
        let class = label_set
            .index_of(doc.label)
            .ok_or(TrainError::LabelOutsideSet(doc.label))?;
        present[class] = true;
        data.push((featurize(&doc.text, config.feature_dim, config.max_tokens), class));
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(TrainError::MissingClass(label_set.labels()[missing]));
    }

    let mut sgd = Sgd {
        params: Params::zeros(config.feature_dim, label_set.len()),
        scale: 1.0,
    };
    let mut active: Vec<usize> = data
        .iter()
        .flat_map(|(x, _)| x.indices.iter().map(|&i| i as usize))
        .collect();
    active.sort_unstable();
    active.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = FitTrace {
        losses: vec![sgd.loss(&data, config.l2, &active)],
    };
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&(SparseVector, usize)> = chunk.iter().map(|&i| &data[i]).collect();
            sgd.step(&batch, config.learning_rate, config.l2);
        }
        let loss = sgd.loss(&data, config.l2, &active);
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch: epoch + 1 });
        }
        trace.losses.push(loss);
    }
    sgd.materialize();
    Ok((
        ReferenceModel {
            label_set: label_set.clone(),
            config: config.clone(),
            params: sgd.params,
        },
        trace,
    ))
}

/// The built-in trainer.
#[derive(Debug, Clone, Default)]
pub struct ReferenceTrainer {
    pub config: TrainerConfig,
}

impl Trainer for ReferenceTrainer {
    fn id(&self) -> &str {
        &self.config.trainer_id
    }

    fn config(&self) -> &TrainerConfig {
        &self.config
    }

    fn fit(&self, train: &[LabeledDocument], labels: &LabelSet, seed: u64) -> Result<Box<dyn Predictor>, TrainError> {
        let config = TrainerConfig {
            seed,
            ..self.config.clone()
        };
        let (model, _) = fit(train, labels, &config)?;
        Ok(Box::new(model))
    }
}

impl Predictor for ReferenceModel {
    fn label_set(&self) -> &LabelSet {
        &self.label_set
    }

    fn predict(&self, texts: &[&str]) -> Result<Vec<SentimentLabel>, TrainError> {
        Ok(texts.iter().map(|t| self.predict_text(t)).collect())
    }

    fn info(&self) -> ModelInfo {
        ModelInfo {
            trainer_id: self.config.trainer_id.clone(),
            parameter_count: self.parameter_count(),
            notes: format!(
                "hashed uni+bigram logistic regression, {} features x {} classes",
                self.params.dim, self.params.classes
            ),
        }
    }
}
