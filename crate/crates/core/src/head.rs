//! One-layer softmax classifier trained with ADAM on frozen features.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Floor applied to per-sample log-probabilities inside the loss.
pub const LOG_PROB_FLOOR: f64 = -50.0;

/// Weights `W` (K x d, row-major) and bias `b` (K) of `softmax(W f + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    dim: usize,
    k_classes: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl TrainConfig {
    /// Active-loop settings used for the 9-class colorectal tissue set.
    pub fn nct() -> Self {
        Self {
            learning_rate: 0.0004,
            batch_size: 128,
            epochs: 200,
            weight_decay: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Active-loop settings used for the 8-class breast tumour set.
    pub fn breakhis() -> Self {
        Self {
            learning_rate: 0.0012,
            epochs: 100,
            ..Self::nct()
        }
    }

    /// Batch, epochs and weight decay of [`TrainConfig::nct`] with a step
    /// size that lets 200 full-batch steps converge on unnormalised
    /// synthetic clusters.
    pub fn synthetic() -> Self {
        Self {
            learning_rate: 0.05,
            ..Self::nct()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "nct" => Ok(Self::nct()),
            "breakhis" => Ok(Self::breakhis()),
            "synthetic" => Ok(Self::synthetic()),
            other => Err(Error::config(format!("unknown training preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("adam epsilon must be positive"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::nct()
    }
}

/// First and second moment estimates for `W` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m_weights: Vec<f64>,
    pub v_weights: Vec<f64>,
    pub m_bias: Vec<f64>,
    pub v_bias: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn for_head(head: &LinearHead) -> Self {
        Self {
            m_weights: vec![0.0; head.weights.len()],
            v_weights: vec![0.0; head.weights.len()],
            m_bias: vec![0.0; head.bias.len()],
            v_bias: vec![0.0; head.bias.len()],
            step: 0,
        }
    }
}

/// Gradient of the regularised loss with respect to `W` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-epoch training objective (mean cross-entropy plus L2 penalty).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl LinearHead {
    pub fn zeros(dim: usize, k_classes: usize) -> Self {
        Self {
            dim,
            k_classes,
            weights: vec![0.0; dim * k_classes],
            bias: vec![0.0; k_classes],
        }
    }

    pub fn from_parts(
        dim: usize,
        k_classes: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != dim * k_classes {
            return Err(Error::DimensionMismatch {
                expected: dim * k_classes,
                got: weights.len(),
            });
        }
        if bias.len() != k_classes {
            return Err(Error::DimensionMismatch {
                expected: k_classes,
                got: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|x| !x.is_finite()) {
            return Err(Error::input("head parameters must be finite"));
        }
        Ok(Self {
            dim,
            k_classes,
            weights,
            bias,
        })
    }

    /// Xavier-uniform weights in `±sqrt(6 / (d + K))`, zero bias.
    pub fn init_xavier(dim: usize, k_classes: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (dim + k_classes) as f64).sqrt();
        let weights = (0..dim * k_classes)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        Self {
            dim,
            k_classes,
            weights,
            bias: vec![0.0; k_classes],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    fn logits_unchecked(&self, features: &[f32]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(w, &b)| {
                b + w
                    .iter()
                    .zip(features)
                    .map(|(&wi, &xi)| wi * xi as f64)
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn logits(&self, features: &[f32]) -> Result<Vec<f64>> {
        self.check_dim(features.len())?;
        Ok(self.logits_unchecked(features))
    }

    pub fn predict_proba(&self, features: &[f32]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(features)?))
    }

    /// Probabilities for every row of a row-major matrix with `d` columns.
    pub fn predict_proba_matrix(&self, features: &[f32]) -> Result<Vec<Vec<f64>>> {
        if features.len() % self.dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: features.len() % self.dim,
            });
        }
        Ok(features
            .chunks_exact(self.dim)
            .map(|row| softmax(&self.logits_unchecked(row)))
            .collect())
    }

    pub fn predict_proba_rows(
        &self,
        dataset: &EmbeddingDataset,
        indices: &[usize],
    ) -> Result<Vec<Vec<f64>>> {
        self.check_dim(dataset.dim())?;
        Ok(indices
            .iter()
            .map(|&i| softmax(&self.logits_unchecked(dataset.row(i))))
            .collect())
    }

    pub fn predict(&self, features: &[f32]) -> Result<usize> {
        Ok(argmax(&self.logits(features)?))
    }

    /// Argmax class for each index of `unlabelled`, aligned with it.
    pub fn pseudo_labels(
        &self,
        dataset: &EmbeddingDataset,
        unlabelled: &[usize],
    ) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba_rows(dataset, unlabelled)?
            .iter()
            .map(|p| argmax(p))
            .collect())
    }

    /// Mean cross-entropy over `batch` plus `weight_decay * ||W||^2`, and its
    /// gradient. `batch` holds `(sample index, class)` pairs. The bias is
    /// not regularised.
    pub fn loss_and_gradient(
        &self,
        dataset: &EmbeddingDataset,
        batch: &[(usize, usize)],
        weight_decay: f64,
    ) -> Result<(f64, Gradient)> {
        self.check_dim(dataset.dim())?;
        if batch.is_empty() {
            return Err(Error::ColdStartRequired);
        }
        let k = self.k_classes;
        let scale = 1.0 / batch.len() as f64;
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; k];
        let mut loss = 0.0;
        for &(i, y) in batch {
            if y >= k {
                return Err(Error::input(format!("label {y} is not below {k}")));
            }
            let x = dataset.row(i);
            let logp = log_softmax(&self.logits_unchecked(x));
            if logp[y] < LOG_PROB_FLOOR {
                // clamped: constant loss, no gradient from this sample
                loss -= LOG_PROB_FLOOR;
                continue;
            }
            loss -= logp[y];
            for c in 0..k {
                let delta = (logp[c].exp() - if c == y { 1.0 } else { 0.0 }) * scale;
                grad_b[c] += delta;
                let row = &mut grad_w[c * self.dim..(c + 1) * self.dim];
                for (g, &xj) in row.iter_mut().zip(x) {
                    *g += delta * xj as f64;
                }
            }
        }
        loss *= scale;
        let mut penalty = 0.0;
        for (g, &w) in grad_w.iter_mut().zip(&self.weights) {
            penalty += w * w;
            *g += 2.0 * weight_decay * w;
        }
        loss += weight_decay * penalty;
        Ok((
            loss,
            Gradient {
                weights: grad_w,
                bias: grad_b,
            },
        ))
    }

    fn adam_step(&mut self, grad: &Gradient, state: &mut AdamState, config: &TrainConfig) {
        state.step += 1;
        let t = state.step as i32;
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);
        let update = |param: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((p, &gi), mi), vi) in param.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = config.beta1 * *mi + (1.0 - config.beta1) * gi;
                *vi = config.beta2 * *vi + (1.0 - config.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        };
        update(
            &mut self.weights,
            &grad.weights,
            &mut state.m_weights,
            &mut state.v_weights,
        );
        update(&mut self.bias, &grad.bias, &mut state.m_bias, &mut state.v_bias);
    }

    /// Fits the head on `(sample index, class)` pairs with shuffled
    /// mini-batches. A set no larger than `batch_size` is used as a single
    /// full batch every epoch and consumes no shuffle draws.
    pub fn train(
        mut self,
        dataset: &EmbeddingDataset,
        labelled: &[(usize, usize)],
        config: &TrainConfig,
        rng: &mut Rng,
    ) -> Result<(LinearHead, TrainReport)> {
        config.validate()?;
        if labelled.is_empty() {
            return Err(Error::ColdStartRequired);
        }
        self.check_dim(dataset.dim())?;
        let mut state = AdamState::for_head(&self);
        let mut report = TrainReport::default();
        let mut order = labelled.to_vec();
        for _ in 0..config.epochs {
            if order.len() > config.batch_size {
                rng.shuffle(&mut order);
            }
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                let (loss, grad) = self.loss_and_gradient(dataset, batch, config.weight_decay)?;
                epoch_loss += loss * batch.len() as f64;
                self.adam_step(&grad, &mut state, config);
            }
            report.epoch_losses.push(epoch_loss / order.len() as f64);
        }
        Ok((self, report))
    }

    /// Serialises as `"MALW"`, version u32, d u32, K u32, then `W` and `b`
    /// as little-endian f32.
    pub fn encode_weights(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * (self.weights.len() + self.bias.len()));
        out.extend_from_slice(b"MALW");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.k_classes as u32).to_le_bytes());
        for &x in self.weights.iter().chain(&self.bias) {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out
    }

    pub fn decode_weights(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::format(bytes.len() as u64, "truncated weight header"));
        }
        if &bytes[..4] != b"MALW" {
            return Err(Error::format(0, "bad magic, expected \"MALW\""));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        if word(4) != 1 {
            return Err(Error::format(4, format!("unsupported version {}", word(4))));
        }
        let dim = word(8) as usize;
        let k = word(12) as usize;
        let expected = 16 + 4 * (dim * k + k);
        if bytes.len() != expected {
            return Err(Error::format(
                bytes.len().min(expected) as u64,
                format!("weight payload must be {expected} bytes"),
            ));
        }
        let values: Vec<f64> = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let (w, b) = values.split_at(dim * k);
        Self::from_parts(dim, k, w.to_vec(), b.to_vec())
    }

    pub fn write_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode_weights())?;
        Ok(())
    }

    pub fn read_weights(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode_weights(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> EmbeddingDataset {
        EmbeddingDataset::new(vec![1.0, 0.5, -1.0, -0.5], 2, vec![Some(0), Some(1)], 2).unwrap()
    }

    #[test]
    fn xavier_bounds_and_zero_bias() {
        let head = LinearHead::init_xavier(4, 2, &mut Rng::seed_from(0));
        assert!(head.weights().iter().all(|w| w.abs() <= 1.0));
        assert!(head.bias().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_head_is_uniform() {
        let head = LinearHead::zeros(3, 4);
        let p = head.predict_proba(&[1.0, -2.0, 3.0]).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_only_head() {
        let head = LinearHead::from_parts(1, 2, vec![0.0, 0.0], vec![2f64.ln(), 0.0]).unwrap();
        let p = head.predict_proba(&[5.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let head = LinearHead::zeros(3, 2);
        assert!(matches!(
            head.predict_proba(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn argmax_tie_takes_lowest() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn separable_pair_is_fit() {
        let ds = two_points();
        let mut rng = Rng::seed_from(4);
        let head = LinearHead::init_xavier(2, 2, &mut rng);
        let config = TrainConfig {
            learning_rate: 0.01,
            ..TrainConfig::nct()
        };
        let (head, _) = head.train(&ds, &[(0, 0), (1, 1)], &config, &mut rng).unwrap();
        assert_eq!(head.predict(ds.row(0)).unwrap(), 0);
        assert_eq!(head.predict(ds.row(1)).unwrap(), 1);
    }

    #[test]
    fn empty_set_requires_cold_start() {
        let ds = two_points();
        let head = LinearHead::zeros(2, 2);
        assert!(matches!(
            head.train(&ds, &[], &TrainConfig::nct(), &mut Rng::seed_from(0)),
            Err(Error::ColdStartRequired)
        ));
    }

    #[test]
    fn pseudo_labels_align_with_pool() {
        let ds = two_points();
        let head = LinearHead::from_parts(2, 2, vec![1.0, 0.0, -1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(head.pseudo_labels(&ds, &[1]).unwrap(), vec![1]);
        assert_eq!(head.pseudo_labels(&ds, &[1, 0]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn weight_dump_round_trip() {
        let head = LinearHead::from_parts(2, 2, vec![0.5, -0.25, 1.0, 2.0], vec![0.125, -3.0]).unwrap();
        let back = LinearHead::decode_weights(&head.encode_weights()).unwrap();
        assert_eq!(back, head);
        let mut bad = head.encode_weights();
        bad[0] = b'X';
        assert!(LinearHead::decode_weights(&bad).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::nct().validate().is_ok());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::nct() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::nct() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..TrainConfig::nct() }.validate().is_err());
        assert!(TrainConfig { weight_decay: -1.0, ..TrainConfig::nct() }.validate().is_err());
    }
}
