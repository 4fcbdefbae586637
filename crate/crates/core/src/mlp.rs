//! Multilayer perceptron with one hidden layer.
//!
//! tanh hidden units, logistic-sigmoid outputs (the data space is `[0, 1]`),
//! sum-of-squares loss, full-batch gradient descent with a backtracking line
//! search. Used auto-associatively (inputs reproduced at the outputs through
//! a narrower hidden layer) and as a plain regressor.

use crate::par::map_chunks;
use crate::seeding::{standard_normal, stream_rng, STREAM_INIT};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MlpError {
    #[error("input length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("inputs and targets disagree: {0}")]
    ShapeMismatch(String),
    #[error("loss became non-finite during training")]
    NonFiniteLoss { history: Vec<f64> },
    #[error("bad training config: {0}")]
    BadConfig(String),
}

/// Rows processed per gradient chunk; fixed so that parallel and sequential
/// builds accumulate partial sums in the same order.
const GRAD_CHUNK: usize = 256;

const MAX_HALVINGS: usize = 30;

/// Training settings for full-batch gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Halve the step until the loss decreases (keeps the history monotone).
    pub backtracking: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 250, learning_rate: 0.25, seed: 0, backtracking: true }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MlpError> {
        if self.epochs == 0 {
            return Err(MlpError::BadConfig("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(MlpError::BadConfig("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// A 2-layer perceptron. `w1` is `n_hidden x (n_in + 1)` and `w2` is
/// `n_out x (n_hidden + 1)`; the trailing column of each is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    w1: Array2<f64>,
    w2: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpModelJson {
    format: String,
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    hidden_activation: String,
    output_activation: String,
    w1: Vec<Vec<f64>>,
    w2: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MlpModel {
    /// Random initialization: zero-mean normal weights scaled by
    /// `1 / sqrt(fan_in)`, deterministic per seed.
    pub fn init(n_in: usize, n_hidden: usize, n_out: usize, seed: u64) -> Self {
        assert!(n_in >= 1 && n_hidden >= 1 && n_out >= 1);
        let mut rng = stream_rng(seed, STREAM_INIT);
        let s1 = 1.0 / ((n_in + 1) as f64).sqrt();
        let w1 = Array2::from_shape_fn((n_hidden, n_in + 1), |_| s1 * standard_normal(&mut rng));
        let s2 = 1.0 / ((n_hidden + 1) as f64).sqrt();
        let w2 = Array2::from_shape_fn((n_out, n_hidden + 1), |_| s2 * standard_normal(&mut rng));
        Self { n_in, n_hidden, n_out, w1, w2 }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    /// `sigmoid(W2 [tanh(W1 [x; 1]); 1])`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        if x.len() != self.n_in {
            return Err(MlpError::LengthMismatch { got: x.len(), expected: self.n_in });
        }
        let mut hidden = vec![0.0; self.n_hidden];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut a = self.w1[[j, self.n_in]];
            for (i, xi) in x.iter().enumerate() {
                a += self.w1[[j, i]] * xi;
            }
            *h = a.tanh();
        }
        let mut out = vec![0.0; self.n_out];
        for (k, o) in out.iter_mut().enumerate() {
            let mut a = self.w2[[k, self.n_hidden]];
            for (j, hj) in hidden.iter().enumerate() {
                a += self.w2[[k, j]] * hj;
            }
            *o = sigmoid(a);
        }
        Ok(out)
    }

    fn check_batch(&self, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<(), MlpError> {
        if inputs.ncols() != self.n_in {
            return Err(MlpError::ShapeMismatch(format!(
                "inputs have {} columns, model takes {}",
                inputs.ncols(),
                self.n_in
            )));
        }
        if targets.ncols() != self.n_out {
            return Err(MlpError::ShapeMismatch(format!(
                "targets have {} columns, model emits {}",
                targets.ncols(),
                self.n_out
            )));
        }
        if inputs.nrows() != targets.nrows() {
            return Err(MlpError::ShapeMismatch(format!(
                "{} input rows vs {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(())
    }

    fn with_bias_column(block: ndarray::ArrayView2<f64>) -> Array2<f64> {
        let (n, d) = block.dim();
        let mut out = Array2::ones((n, d + 1));
        out.slice_mut(ndarray::s![.., ..d]).assign(&block);
        out
    }

    /// Sum of squared errors over the batch.
    pub fn batch_loss(&self, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<f64, MlpError> {
        self.check_batch(inputs, targets)?;
        let partials = map_chunks(inputs.nrows(), GRAD_CHUNK, |r| {
            let xb = Self::with_bias_column(inputs.slice(ndarray::s![r.clone(), ..]));
            let h = xb.dot(&self.w1.t()).mapv(f64::tanh);
            let hb = Self::with_bias_column(h.view());
            let y = hb.dot(&self.w2.t()).mapv(sigmoid);
            let t = targets.slice(ndarray::s![r, ..]);
            (&y - &t).mapv(|e| e * e).sum()
        });
        Ok(partials.iter().sum())
    }

    /// Sum-of-squares loss and its gradient with respect to all weights,
    /// flattened W1 row-major then W2 row-major.
    pub fn loss_and_gradient(
        &self,
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
    ) -> Result<(f64, Vec<f64>), MlpError> {
        self.check_batch(inputs, targets)?;
        let partials = map_chunks(inputs.nrows(), GRAD_CHUNK, |r| {
            let xb = Self::with_bias_column(inputs.slice(ndarray::s![r.clone(), ..]));
            let h = xb.dot(&self.w1.t()).mapv(f64::tanh);
            let hb = Self::with_bias_column(h.view());
            let y = hb.dot(&self.w2.t()).mapv(sigmoid);
            let t = targets.slice(ndarray::s![r, ..]);
            let resid = &y - &t;
            let loss = resid.mapv(|e| e * e).sum();
            // d(loss)/d(a2) = 2 resid * y (1 - y)
            let d2 = &resid * &y.mapv(|v| 2.0 * v * (1.0 - v));
            let g2 = d2.t().dot(&hb);
            let w2_nobias = self.w2.slice(ndarray::s![.., ..self.n_hidden]);
            let dh = d2.dot(&w2_nobias);
            let d1 = &dh * &h.mapv(|v| 1.0 - v * v);
            let g1 = d1.t().dot(&xb);
            (loss, g1, g2)
        });
        let mut loss = 0.0;
        let mut g1 = Array2::zeros(self.w1.dim());
        let mut g2 = Array2::zeros(self.w2.dim());
        for (l, p1, p2) in partials {
            loss += l;
            g1 += &p1;
            g2 += &p2;
        }
        let mut flat = Vec::with_capacity(self.n_weights());
        flat.extend(g1.iter());
        flat.extend(g2.iter());
        Ok((loss, flat))
    }

    pub fn n_weights(&self) -> usize {
        self.w1.len() + self.w2.len()
    }

    /// All weights, W1 row-major then W2 row-major.
    pub fn flat_weights(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_weights());
        flat.extend(self.w1.iter());
        flat.extend(self.w2.iter());
        flat
    }

    /// A model with the same shape and the given flat weight vector.
    pub fn with_flat_weights(&self, flat: &[f64]) -> Result<Self, MlpError> {
        if flat.len() != self.n_weights() {
            return Err(MlpError::LengthMismatch {
                got: flat.len(),
                expected: self.n_weights(),
            });
        }
        let split = self.w1.len();
        let w1 = Array2::from_shape_vec(self.w1.dim(), flat[..split].to_vec()).unwrap();
        let w2 = Array2::from_shape_vec(self.w2.dim(), flat[split..].to_vec()).unwrap();
        Ok(Self { w1, w2, ..*self })
    }

    fn stepped(&self, gradient: &[f64], step: f64) -> Self {
        let w: Vec<f64> = self
            .flat_weights()
            .iter()
            .zip(gradient)
            .map(|(w, g)| w - step * g)
            .collect();
        self.with_flat_weights(&w).expect("same shape")
    }

    /// Full-batch gradient descent. With backtracking the step is halved (up
    /// to 30 times) until the loss does not increase, so the returned history
    /// (initial loss plus one entry per epoch) is non-increasing.
    pub fn train(
        &self,
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
        cfg: &TrainConfig,
    ) -> Result<(Self, Vec<f64>), MlpError> {
        cfg.validate()?;
        let mut model = self.clone();
        let (initial, mut grad) = model.loss_and_gradient(inputs, targets)?;
        if !initial.is_finite() {
            return Err(MlpError::NonFiniteLoss { history: vec![initial] });
        }
        let mut history = Vec::with_capacity(cfg.epochs + 1);
        history.push(initial);
        let mut current = initial;
        for epoch in 0..cfg.epochs {
            if cfg.backtracking {
                let mut step = cfg.learning_rate;
                for _ in 0..=MAX_HALVINGS {
                    let cand = model.stepped(&grad, step);
                    let cand_loss = cand.batch_loss(inputs, targets)?;
                    if cand_loss.is_finite() && cand_loss <= current {
                        model = cand;
                        current = cand_loss;
                        break;
                    }
                    step *= 0.5;
                }
                // no acceptable step: keep the weights, repeat the loss
            } else {
                model = model.stepped(&grad, cfg.learning_rate);
                current = model.batch_loss(inputs, targets)?;
            }
            history.push(current);
            if !current.is_finite() {
                return Err(MlpError::NonFiniteLoss { history });
            }
            if epoch + 1 < cfg.epochs {
                grad = model.loss_and_gradient(inputs, targets)?.1;
            }
        }
        Ok((model, history))
    }

    /// Versioned JSON listing dims, activations and full-precision weights.
    pub fn to_json(&self) -> String {
        let mirror = MlpModelJson {
            format: "mlp-v1".into(),
            n_in: self.n_in,
            n_hidden: self.n_hidden,
            n_out: self.n_out,
            hidden_activation: "tanh".into(),
            output_activation: "sigmoid".into(),
            w1: self.w1.rows().into_iter().map(|r| r.to_vec()).collect(),
            w2: self.w2.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_string_pretty(&mirror).expect("mlp serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mirror: MlpModelJson = serde_json::from_str(text)?;
        let w1 = Array2::from_shape_vec(
            (mirror.n_hidden, mirror.n_in + 1),
            mirror.w1.into_iter().flatten().collect(),
        )
        .map_err(serde::de::Error::custom)?;
        let w2 = Array2::from_shape_vec(
            (mirror.n_out, mirror.n_hidden + 1),
            mirror.w2.into_iter().flatten().collect(),
        )
        .map_err(serde::de::Error::custom)?;
        Ok(Self {
            n_in: mirror.n_in,
            n_hidden: mirror.n_hidden,
            n_out: mirror.n_out,
            w1,
            w2,
        })
    }

    /// Batch forward pass returning one output row per input row.
    pub fn forward_batch(&self, inputs: &Array2<f64>) -> Result<Array2<f64>, MlpError> {
        if inputs.ncols() != self.n_in {
            return Err(MlpError::ShapeMismatch(format!(
                "inputs have {} columns, model takes {}",
                inputs.ncols(),
                self.n_in
            )));
        }
        let xb = Self::with_bias_column(inputs.view());
        let h = xb.dot(&self.w1.t()).mapv(f64::tanh);
        let hb = Self::with_bias_column(h.view());
        Ok(hb.dot(&self.w2.t()).mapv(sigmoid))
    }

    /// Mean per-output value over rows; handy for smoke checks.
    pub fn mean_output(&self, inputs: &Array2<f64>) -> Result<Array1<f64>, MlpError> {
        Ok(self
            .forward_batch(inputs)?
            .mean_axis(Axis(0))
            .expect("non-empty batch"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Independent loop-based forward pass, written apart from the production
    /// path so the two can be compared.
    fn oracle_forward(m: &MlpModel, x: &[f64]) -> Vec<f64> {
        let mut h = Vec::new();
        for j in 0..m.n_hidden() {
            let mut a = 0.0;
            for i in 0..m.n_in() {
                a += m.w1()[[j, i]] * x[i];
            }
            a += m.w1()[[j, m.n_in()]];
            h.push(a.tanh());
        }
        let mut y = Vec::new();
        for k in 0..m.n_out() {
            let mut a = 0.0;
            for j in 0..m.n_hidden() {
                a += m.w2()[[k, j]] * h[j];
            }
            a += m.w2()[[k, m.n_hidden()]];
            y.push(1.0 / (1.0 + (-a).exp()));
        }
        y
    }

    fn oracle_loss(m: &MlpModel, inputs: &Array2<f64>, targets: &Array2<f64>) -> f64 {
        let mut loss = 0.0;
        for i in 0..inputs.nrows() {
            let y = oracle_forward(m, &inputs.row(i).to_vec());
            for k in 0..targets.ncols() {
                let e = y[k] - targets[[i, k]];
                loss += e * e;
            }
        }
        loss
    }

    #[test]
    fn init_shapes_follow_bias_arithmetic() {
        let m = MlpModel::init(13, 11, 13, 7);
        assert_eq!(m.w1().dim(), (11, 14));
        assert_eq!(m.w2().dim(), (13, 12));
        let m = MlpModel::init(2, 1, 1, 0);
        assert_eq!(m.w1().dim(), (1, 3));
        assert_eq!(m.w2().dim(), (1, 2));
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = MlpModel::init(5, 3, 2, 42);
        let b = MlpModel::init(5, 3, 2, 42);
        assert_eq!(a, b);
        let c = MlpModel::init(5, 3, 2, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_weights_output_one_half() {
        let m = MlpModel::init(3, 2, 4, 1);
        let m = m.with_flat_weights(&vec![0.0; m.n_weights()]).unwrap();
        let y = m.forward(&[0.3, -0.7, 2.0]).unwrap();
        assert!(y.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn hand_evaluated_1_1_1_net() {
        let m = MlpModel::init(1, 1, 1, 1);
        // W1 = [1, 0], W2 = [1, 0]
        let m = m.with_flat_weights(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let y = m.forward(&[0.0]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let m = MlpModel::init(2, 2, 1, 9);
        let x = [0.37, -1.2];
        let y = m.forward(&x).unwrap();
        let o = oracle_forward(&m, &x);
        for (a, b) in y.iter().zip(&o) {
            assert!((a - b).abs() < 1e-12);
        }
        // batched path agrees too
        let inputs = array![[0.37, -1.2], [0.9, 0.1]];
        let batch = m.forward_batch(&inputs).unwrap();
        assert!((batch[[0, 0]] - y[0]).abs() < 1e-12);
    }

    #[test]
    fn perfect_targets_give_zero_loss_and_gradient() {
        let m = MlpModel::init(3, 2, 2, 5);
        let inputs = array![[0.1, 0.5, 0.9], [0.3, 0.3, 0.3]];
        let outs = m.forward_batch(&inputs).unwrap();
        let (loss, grad) = m.loss_and_gradient(&inputs, &outs).unwrap();
        assert!(loss.abs() < 1e-24);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn duplicated_batch_doubles_loss_and_gradient() {
        let m = MlpModel::init(2, 3, 2, 6);
        let inputs = array![[0.2, 0.8], [0.6, 0.4]];
        let targets = array![[0.1, 0.9], [0.5, 0.5]];
        let (l1, g1) = m.loss_and_gradient(&inputs, &targets).unwrap();
        let inputs2 = ndarray::concatenate![Axis(0), inputs, inputs];
        let targets2 = ndarray::concatenate![Axis(0), targets, targets];
        let (l2, g2) = m.loss_and_gradient(&inputs2, &targets2).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
        for (a, b) in g2.iter().zip(&g1) {
            assert!((a - 2.0 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let m = MlpModel::init(3, 3, 3, 100 + seed);
            let mut rng = crate::seeding::stream_rng(seed, 0xAB);
            let inputs = Array2::from_shape_fn((4, 3), |_| {
                crate::seeding::standard_normal(&mut rng) * 0.5
            });
            let targets = Array2::from_shape_fn((4, 3), |_| {
                0.5 + 0.3 * crate::seeding::standard_normal(&mut rng).tanh()
            });
            let (_, grad) = m.loss_and_gradient(&inputs, &targets).unwrap();
            let w = m.flat_weights();
            let h = 1e-5;
            for i in 0..w.len() {
                let mut wp = w.clone();
                wp[i] += h;
                let mut wm = w.clone();
                wm[i] -= h;
                let lp = oracle_loss(&m.with_flat_weights(&wp).unwrap(), &inputs, &targets);
                let lm = oracle_loss(&m.with_flat_weights(&wm).unwrap(), &inputs, &targets);
                let fd = (lp - lm) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn single_epoch_history_has_two_non_increasing_entries() {
        let m = MlpModel::init(2, 2, 1, 3);
        let inputs = array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]];
        let targets = array![[0.2], [0.8], [0.4]];
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let (_, history) = m.train(&inputs, &targets, &cfg).unwrap();
        assert_eq!(history.len(), 2);
        assert!(history[1] <= history[0]);
        // epochs = 0 rejected
        let bad = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(matches!(m.train(&inputs, &targets, &bad), Err(MlpError::BadConfig(_))));
    }

    #[test]
    fn training_history_is_monotone_non_increasing() {
        let m = MlpModel::init(3, 4, 2, 8);
        let mut rng = crate::seeding::stream_rng(17, 0xCD);
        let inputs = Array2::from_shape_fn((30, 3), |_| {
            0.5 + 0.4 * crate::seeding::standard_normal(&mut rng).tanh()
        });
        let targets = Array2::from_shape_fn((30, 2), |_| {
            0.5 + 0.4 * crate::seeding::standard_normal(&mut rng).tanh()
        });
        let cfg = TrainConfig { epochs: 40, ..TrainConfig::default() };
        let (_, history) = m.train(&inputs, &targets, &cfg).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0], "history increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn auto_associative_training_halves_the_loss() {
        use crate::data_model::{default_schema, default_synth_spec, encode, synthesize};
        let schema = default_schema();
        let table = synthesize(&schema, 200, 77, &default_synth_spec()).unwrap();
        let matrix = encode(&table).unwrap();
        let data = matrix.values().clone();
        let m = MlpModel::init(13, 11, 13, 7);
        let cfg = TrainConfig { epochs: 250, ..TrainConfig::default() };
        let (_, history) = m.train(&data, &data, &cfg).unwrap();
        let (first, last) = (history[0], *history.last().unwrap());
        assert!(
            last < 0.5 * first,
            "expected < half the initial loss, got {last} of {first}"
        );
    }

    #[test]
    fn identical_rows_converge_to_that_row() {
        let row = [0.2, 0.7, 0.4];
        let inputs = Array2::from_shape_fn((20, 3), |(_, j)| row[j]);
        let m = MlpModel::init(3, 2, 3, 4);
        let cfg = TrainConfig { epochs: 400, learning_rate: 0.5, ..TrainConfig::default() };
        let (trained, history) = m.train(&inputs, &inputs, &cfg).unwrap();
        assert!(*history.last().unwrap() < 0.05 * history[0]);
        let y = trained.forward(&row).unwrap();
        for (a, b) in y.iter().zip(&row) {
            assert!((a - b).abs() < 0.08, "output {a} vs target {b}");
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = MlpModel::init(4, 3, 2, 12);
        let back = MlpModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
