//! Sugeno fuzzy inference systems trained the ANFIS way.
//!
//! Rule premises are Gaussian memberships (layer 1), firing strengths are
//! products (layer 2) normalized to sum to one (layer 3), consequents are
//! affine functions weighted by the normalized strengths (layer 4) and summed
//! (layer 5). Rule structure comes from subtractive clustering; consequents
//! are initialized by least squares and every parameter is then tuned by
//! gradient descent with a backtracking line search.
//!
//! Models are single-output; multi-output targets are handled by an
//! [`AnfisBank`] with one model per output dimension, sharing one clustering
//! pass over the common inputs.

use crate::par::map_chunks;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnfisError {
    #[error("no data rows")]
    EmptyData,
    #[error("input length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("loss became non-finite during training")]
    NonFiniteLoss { history: Vec<f64> },
    #[error("bad config: {0}")]
    BadConfig(String),
}

/// Subtractive clustering settings. Only the radius is typically tuned; the
/// auxiliary ratios follow the conventional fuzzy-toolbox defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub radius: f64,
    pub squash_factor: f64,
    pub accept_ratio: f64,
    pub reject_ratio: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { radius: 0.3, squash_factor: 1.25, accept_ratio: 0.5, reject_ratio: 0.15 }
    }
}

impl ClusterConfig {
    fn validate(&self) -> Result<(), AnfisError> {
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(AnfisError::BadConfig(format!("radius {} outside (0, 1]", self.radius)));
        }
        if self.squash_factor <= 0.0 {
            return Err(AnfisError::BadConfig("squash_factor must be > 0".into()));
        }
        if !(0.0 < self.reject_ratio
            && self.reject_ratio < self.accept_ratio
            && self.accept_ratio <= 1.0)
        {
            return Err(AnfisError::BadConfig("need 0 < reject_ratio < accept_ratio <= 1".into()));
        }
        Ok(())
    }
}

/// One fuzzy rule: per-input Gaussian premise and an affine consequent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub centers: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

/// A single-output Sugeno system.
#[derive(Debug, Clone, PartialEq)]
pub struct AnfisModel {
    n_in: usize,
    rules: Vec<FuzzyRule>,
}

#[derive(Serialize, Deserialize)]
struct AnfisModelJson {
    format: String,
    n_in: usize,
    membership: String,
    rules: Vec<FuzzyRule>,
}

const SIGMA_FLOOR: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;
/// Samples per gradient chunk (fixed so reductions fold in a stable order).
const GRAD_CHUNK: usize = 64;
/// Least squares is attempted only when the system is comfortably
/// overdetermined; rule explosions would make the normal equations singular
/// or impractically large, and the fallback covers them.
const MAX_LSQ_PARAMS: usize = 512;

/// Selects cluster centers by iteratively taking the highest-potential data
/// row and subtracting its influence. Every returned center is a data row.
pub fn subtractive_cluster(
    data: &Array2<f64>,
    cfg: &ClusterConfig,
) -> Result<Vec<Vec<f64>>, AnfisError> {
    cfg.validate()?;
    let n = data.nrows();
    if n == 0 {
        return Err(AnfisError::EmptyData);
    }
    let alpha = 4.0 / (cfg.radius * cfg.radius);
    let rb = cfg.radius * cfg.squash_factor;
    let beta = 4.0 / (rb * rb);

    let dist2 = |i: usize, j: usize| -> f64 {
        data.row(i)
            .iter()
            .zip(data.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };

    let mut potentials: Vec<f64> = map_chunks(n, 128, |range| {
        range
            .map(|i| (0..n).map(|j| (-alpha * dist2(i, j)).exp()).sum::<f64>())
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let argmax = |p: &[f64]| -> usize {
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        best
    };

    let mut centers: Vec<usize> = Vec::new();
    let first = argmax(&potentials);
    let reference = potentials[first];
    let accept = |idx: usize, potentials: &mut Vec<f64>, centers: &mut Vec<usize>| {
        let p = potentials[idx];
        for i in 0..n {
            potentials[i] -= p * (-beta * dist2(i, idx)).exp();
        }
        centers.push(idx);
    };
    accept(first, &mut potentials, &mut centers);

    while centers.len() < n {
        let cand = argmax(&potentials);
        let p = potentials[cand];
        if p > cfg.accept_ratio * reference {
            accept(cand, &mut potentials, &mut centers);
        } else if p < cfg.reject_ratio * reference {
            break;
        } else {
            // gray zone: accept only if the candidate sits far enough from
            // the existing centers relative to its potential
            let d_min = centers
                .iter()
                .map(|&c| dist2(cand, c).sqrt())
                .fold(f64::INFINITY, f64::min);
            if d_min / cfg.radius + p / reference >= 1.0 {
                accept(cand, &mut potentials, &mut centers);
            } else {
                potentials[cand] = 0.0;
            }
        }
    }

    Ok(centers.iter().map(|&i| data.row(i).to_vec()).collect())
}

/// Cholesky solve of `a x = b` for symmetric `a`; `None` when not positive
/// definite.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let scale: f64 = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 1e-12 * scale {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

struct Firing {
    weights: Vec<f64>,
    total: f64,
}

impl AnfisModel {
    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    /// Assembles a model from explicit rules (mostly for tests and
    /// deserialization). All rules must share the input width.
    pub fn from_rules(n_in: usize, rules: Vec<FuzzyRule>) -> Result<Self, AnfisError> {
        if rules.is_empty() {
            return Err(AnfisError::EmptyData);
        }
        for r in &rules {
            if r.centers.len() != n_in || r.sigmas.len() != n_in || r.coeffs.len() != n_in {
                return Err(AnfisError::LengthMismatch { got: r.centers.len(), expected: n_in });
            }
            if r.sigmas.iter().any(|s| *s <= 0.0) {
                return Err(AnfisError::BadConfig("sigmas must be positive".into()));
            }
        }
        Ok(Self { n_in, rules })
    }

    /// Builds a model from data: one rule per subtractive-clustering center,
    /// premise widths `radius * column_range / sqrt(8)`, consequents
    /// initialized by least squares on the normalized firing strengths
    /// (falling back to zero coefficients and the target mean when the
    /// normal equations are singular).
    pub fn build(
        inputs: &Array2<f64>,
        targets: &[f64],
        cfg: &ClusterConfig,
    ) -> Result<Self, AnfisError> {
        let centers = subtractive_cluster(inputs, cfg)?;
        Self::from_centers(inputs, targets, &centers, cfg)
    }

    /// Same as [`AnfisModel::build`] but reusing precomputed cluster centers
    /// (a bank clusters once and builds many models).
    pub fn from_centers(
        inputs: &Array2<f64>,
        targets: &[f64],
        centers: &[Vec<f64>],
        cfg: &ClusterConfig,
    ) -> Result<Self, AnfisError> {
        cfg.validate()?;
        let (n, d) = inputs.dim();
        if n == 0 || centers.is_empty() {
            return Err(AnfisError::EmptyData);
        }
        if targets.len() != n {
            return Err(AnfisError::LengthMismatch { got: targets.len(), expected: n });
        }
        let mut sigmas = vec![0.0f64; d];
        for (k, s) in sigmas.iter_mut().enumerate() {
            let col = inputs.column(k);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in col {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            *s = (cfg.radius * (hi - lo) / 8.0f64.sqrt()).max(SIGMA_FLOOR);
        }
        let rules: Vec<FuzzyRule> = centers
            .iter()
            .map(|c| FuzzyRule {
                centers: c.clone(),
                sigmas: sigmas.clone(),
                coeffs: vec![0.0; d],
                offset: 0.0,
            })
            .collect();
        let mut model = Self { n_in: d, rules };
        model.init_consequents(inputs, targets);
        Ok(model)
    }

    /// Least-squares consequent initialization with mean fallback.
    fn init_consequents(&mut self, inputs: &Array2<f64>, targets: &[f64]) {
        let (n, d) = inputs.dim();
        let r = self.rules.len();
        let p = r * (d + 1);
        let mean = targets.iter().sum::<f64>() / n as f64;
        if p > n || p > MAX_LSQ_PARAMS {
            for rule in self.rules.iter_mut() {
                rule.coeffs = vec![0.0; d];
                rule.offset = mean;
            }
            return;
        }
        // design matrix row: [w^_r * x_1 .. w^_r * x_d, w^_r] per rule
        let mut design = vec![vec![0.0; p]; n];
        for (i, row) in design.iter_mut().enumerate() {
            let x: Vec<f64> = inputs.row(i).to_vec();
            let firing = self.firing(&x);
            for rule in 0..r {
                let wn = if firing.total > 0.0 {
                    firing.weights[rule] / firing.total
                } else {
                    1.0 / r as f64
                };
                let base = rule * (d + 1);
                for k in 0..d {
                    row[base + k] = wn * x[k];
                }
                row[base + d] = wn;
            }
        }
        let mut ata = vec![vec![0.0; p]; p];
        let mut atb = vec![0.0; p];
        for (row, &t) in design.iter().zip(targets) {
            for a in 0..p {
                if row[a] == 0.0 {
                    continue;
                }
                atb[a] += row[a] * t;
                for b in a..p {
                    ata[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                ata[a][b] = ata[b][a];
            }
        }
        match cholesky_solve(&ata, &atb) {
            Some(theta) => {
                for (rule_idx, rule) in self.rules.iter_mut().enumerate() {
                    let base = rule_idx * (d + 1);
                    rule.coeffs = theta[base..base + d].to_vec();
                    rule.offset = theta[base + d];
                }
            }
            None => {
                for rule in self.rules.iter_mut() {
                    rule.coeffs = vec![0.0; d];
                    rule.offset = mean;
                }
            }
        }
    }

    fn firing(&self, x: &[f64]) -> Firing {
        let mut weights = Vec::with_capacity(self.rules.len());
        let mut total = 0.0;
        for rule in &self.rules {
            let mut log_w = 0.0;
            for ((xk, c), s) in x.iter().zip(&rule.centers).zip(&rule.sigmas) {
                let z = (xk - c) / s;
                log_w -= 0.5 * z * z;
            }
            let w = log_w.exp();
            weights.push(w);
            total += w;
        }
        Firing { weights, total }
    }

    /// Five-layer evaluation. When every firing strength underflows to zero
    /// the unweighted mean of the consequent outputs is returned.
    pub fn forward(&self, x: &[f64]) -> Result<f64, AnfisError> {
        if x.len() != self.n_in {
            return Err(AnfisError::LengthMismatch { got: x.len(), expected: self.n_in });
        }
        let firing = self.firing(x);
        let consequent = |rule: &FuzzyRule| -> f64 {
            rule.offset + rule.coeffs.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>()
        };
        if firing.total > 0.0 {
            Ok(self
                .rules
                .iter()
                .zip(&firing.weights)
                .map(|(rule, w)| w / firing.total * consequent(rule))
                .sum())
        } else {
            let r = self.rules.len() as f64;
            Ok(self.rules.iter().map(consequent).sum::<f64>() / r)
        }
    }

    /// Normalized firing strengths at `x` (layer 3 outputs); they sum to one
    /// whenever any rule fires.
    pub fn normalized_firing(&self, x: &[f64]) -> Result<Vec<f64>, AnfisError> {
        if x.len() != self.n_in {
            return Err(AnfisError::LengthMismatch { got: x.len(), expected: self.n_in });
        }
        let firing = self.firing(x);
        let r = self.rules.len() as f64;
        Ok(firing
            .weights
            .iter()
            .map(|w| if firing.total > 0.0 { w / firing.total } else { 1.0 / r })
            .collect())
    }

    /// Number of tunable parameters: per rule, `d` centers + `d` sigmas +
    /// `d` coefficients + 1 offset.
    pub fn n_params(&self) -> usize {
        self.rules.len() * (3 * self.n_in + 1)
    }

    /// All parameters flattened rule by rule: centers, sigmas, coeffs, offset.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        for rule in &self.rules {
            flat.extend(&rule.centers);
            flat.extend(&rule.sigmas);
            flat.extend(&rule.coeffs);
            flat.push(rule.offset);
        }
        flat
    }

    /// A model with the given flat parameters; sigmas are clamped to stay
    /// positive.
    pub fn with_flat_params(&self, flat: &[f64]) -> Result<Self, AnfisError> {
        if flat.len() != self.n_params() {
            return Err(AnfisError::LengthMismatch { got: flat.len(), expected: self.n_params() });
        }
        let d = self.n_in;
        let stride = 3 * d + 1;
        let rules = (0..self.rules.len())
            .map(|r| {
                let base = r * stride;
                FuzzyRule {
                    centers: flat[base..base + d].to_vec(),
                    sigmas: flat[base + d..base + 2 * d]
                        .iter()
                        .map(|s| s.max(SIGMA_FLOOR))
                        .collect(),
                    coeffs: flat[base + 2 * d..base + 3 * d].to_vec(),
                    offset: flat[base + 3 * d],
                }
            })
            .collect();
        Ok(Self { n_in: d, rules })
    }

    fn check_training_data(&self, inputs: &Array2<f64>, targets: &[f64]) -> Result<(), AnfisError> {
        if inputs.nrows() == 0 {
            return Err(AnfisError::EmptyData);
        }
        if inputs.ncols() != self.n_in {
            return Err(AnfisError::LengthMismatch { got: inputs.ncols(), expected: self.n_in });
        }
        if targets.len() != inputs.nrows() {
            return Err(AnfisError::LengthMismatch {
                got: targets.len(),
                expected: inputs.nrows(),
            });
        }
        Ok(())
    }

    /// Sum of squared errors over the data.
    pub fn batch_loss(&self, inputs: &Array2<f64>, targets: &[f64]) -> Result<f64, AnfisError> {
        self.check_training_data(inputs, targets)?;
        let partials = map_chunks(inputs.nrows(), GRAD_CHUNK, |range| {
            range
                .map(|i| {
                    let out = self.forward(&inputs.row(i).to_vec()).expect("width checked");
                    let e = out - targets[i];
                    e * e
                })
                .sum::<f64>()
        });
        Ok(partials.iter().sum())
    }

    /// Loss and its gradient over all parameters, flattened as in
    /// [`AnfisModel::flat_params`].
    pub fn loss_and_gradient(
        &self,
        inputs: &Array2<f64>,
        targets: &[f64],
    ) -> Result<(f64, Vec<f64>), AnfisError> {
        self.check_training_data(inputs, targets)?;
        let d = self.n_in;
        let stride = 3 * d + 1;
        let n_params = self.n_params();
        let partials = map_chunks(inputs.nrows(), GRAD_CHUNK, |range| {
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for i in range {
                let x: Vec<f64> = inputs.row(i).to_vec();
                let firing = self.firing(&x);
                let consequents: Vec<f64> = self
                    .rules
                    .iter()
                    .map(|rule| {
                        rule.offset + rule.coeffs.iter().zip(&x).map(|(a, xi)| a * xi).sum::<f64>()
                    })
                    .collect();
                let n_rules = self.rules.len() as f64;
                let out: f64 = if firing.total > 0.0 {
                    (0..self.rules.len())
                        .map(|r| firing.weights[r] / firing.total * consequents[r])
                        .sum()
                } else {
                    consequents.iter().sum::<f64>() / n_rules
                };
                let e = out - targets[i];
                loss += e * e;
                let dl_dout = 2.0 * e;
                for (r, rule) in self.rules.iter().enumerate() {
                    let base = r * stride;
                    if firing.total > 0.0 {
                        let wn = firing.weights[r] / firing.total;
                        for k in 0..d {
                            grad[base + 2 * d + k] += dl_dout * wn * x[k];
                        }
                        grad[base + 3 * d] += dl_dout * wn;
                        let dout_dw = (consequents[r] - out) / firing.total;
                        let w = firing.weights[r];
                        for k in 0..d {
                            let sk = rule.sigmas[k];
                            let diff = x[k] - rule.centers[k];
                            let dw_dc = w * diff / (sk * sk);
                            let dw_ds = w * diff * diff / (sk * sk * sk);
                            grad[base + k] += dl_dout * dout_dw * dw_dc;
                            grad[base + d + k] += dl_dout * dout_dw * dw_ds;
                        }
                    } else {
                        for k in 0..d {
                            grad[base + 2 * d + k] += dl_dout * x[k] / n_rules;
                        }
                        grad[base + 3 * d] += dl_dout / n_rules;
                    }
                }
            }
            (loss, grad)
        });
        let mut loss = 0.0;
        let mut grad = vec![0.0; n_params];
        for (l, g) in partials {
            loss += l;
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        Ok((loss, grad))
    }

    /// Gradient descent with backtracking over all premise and consequent
    /// parameters; the returned history (initial loss plus one entry per
    /// epoch) is non-increasing.
    pub fn train(
        &self,
        inputs: &Array2<f64>,
        targets: &[f64],
        epochs: usize,
        learning_rate: f64,
    ) -> Result<(Self, Vec<f64>), AnfisError> {
        if epochs == 0 {
            return Err(AnfisError::BadConfig("epochs must be >= 1".into()));
        }
        if !(learning_rate > 0.0) {
            return Err(AnfisError::BadConfig("learning_rate must be > 0".into()));
        }
        let mut model = self.clone();
        let (initial, mut grad) = model.loss_and_gradient(inputs, targets)?;
        if !initial.is_finite() {
            return Err(AnfisError::NonFiniteLoss { history: vec![initial] });
        }
        let mut history = Vec::with_capacity(epochs + 1);
        history.push(initial);
        let mut current = initial;
        for epoch in 0..epochs {
            let params = model.flat_params();
            let mut step = learning_rate;
            for _ in 0..=MAX_HALVINGS {
                let cand_params: Vec<f64> =
                    params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
                let cand = model.with_flat_params(&cand_params)?;
                let cand_loss = cand.batch_loss(inputs, targets)?;
                if cand_loss.is_finite() && cand_loss <= current {
                    model = cand;
                    current = cand_loss;
                    break;
                }
                step *= 0.5;
            }
            history.push(current);
            if !current.is_finite() {
                return Err(AnfisError::NonFiniteLoss { history });
            }
            if epoch + 1 < epochs {
                grad = model.loss_and_gradient(inputs, targets)?.1;
            }
        }
        Ok((model, history))
    }

    pub fn to_json(&self) -> String {
        let mirror = AnfisModelJson {
            format: "anfis-v1".into(),
            n_in: self.n_in,
            membership: "gaussian".into(),
            rules: self.rules.clone(),
        };
        serde_json::to_string_pretty(&mirror).expect("anfis serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mirror: AnfisModelJson = serde_json::from_str(text)?;
        Ok(Self { n_in: mirror.n_in, rules: mirror.rules })
    }
}

/// One single-output model per target dimension, sharing a single clustering
/// pass over the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnfisBank {
    models: Vec<AnfisModel>,
}

impl AnfisBank {
    /// Builds one model per target column, clustering the inputs once.
    pub fn build(
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
        cfg: &ClusterConfig,
    ) -> Result<Self, AnfisError> {
        if inputs.nrows() != targets.nrows() {
            return Err(AnfisError::LengthMismatch {
                got: targets.nrows(),
                expected: inputs.nrows(),
            });
        }
        let centers = subtractive_cluster(inputs, cfg)?;
        let models = (0..targets.ncols())
            .map(|j| {
                let col: Vec<f64> = targets.column(j).to_vec();
                AnfisModel::from_centers(inputs, &col, &centers, cfg)
            })
            .collect::<Result<Vec<_>, _>>()?;
        if models.is_empty() {
            return Err(AnfisError::EmptyData);
        }
        Ok(Self { models })
    }

    pub fn from_models(models: Vec<AnfisModel>) -> Result<Self, AnfisError> {
        if models.is_empty() {
            return Err(AnfisError::EmptyData);
        }
        let d = models[0].n_in();
        if models.iter().any(|m| m.n_in() != d) {
            return Err(AnfisError::LengthMismatch { got: 0, expected: d });
        }
        Ok(Self { models })
    }

    pub fn models(&self) -> &[AnfisModel] {
        &self.models
    }

    pub fn n_in(&self) -> usize {
        self.models[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.models.len()
    }

    /// Trains every member on its own target column.
    pub fn train(
        &self,
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
        epochs: usize,
        learning_rate: f64,
    ) -> Result<(Self, Vec<Vec<f64>>), AnfisError> {
        if targets.ncols() != self.models.len() {
            return Err(AnfisError::LengthMismatch {
                got: targets.ncols(),
                expected: self.models.len(),
            });
        }
        let mut trained = Vec::with_capacity(self.models.len());
        let mut histories = Vec::with_capacity(self.models.len());
        for (j, model) in self.models.iter().enumerate() {
            let col: Vec<f64> = targets.column(j).to_vec();
            let (m, h) = model.train(inputs, &col, epochs, learning_rate)?;
            trained.push(m);
            histories.push(h);
        }
        Ok((Self { models: trained }, histories))
    }

    /// One output per member model.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, AnfisError> {
        self.models.iter().map(|m| m.forward(x)).collect()
    }

    pub fn to_json(&self) -> String {
        let parts: Vec<serde_json::Value> = self
            .models
            .iter()
            .map(|m| serde_json::from_str(&m.to_json()).expect("member serializes"))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "format": "anfis-bank-v1",
            "models": parts,
        }))
        .expect("bank serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct BankJson {
            models: Vec<AnfisModelJson>,
        }
        let mirror: BankJson = serde_json::from_str(text)?;
        Ok(Self {
            models: mirror
                .models
                .into_iter()
                .map(|m| AnfisModel { n_in: m.n_in, rules: m.rules })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream_rng;
    use ndarray::array;
    use rand::Rng;

    /// Two tight 1-D blobs around 0.1 and 0.9, 20 points each.
    fn two_blobs() -> Array2<f64> {
        let mut rows = Vec::new();
        let mut rng = stream_rng(5, 0xB10B);
        for _ in 0..20 {
            rows.push(0.1 + 0.01 * (rng.gen::<f64>() - 0.5));
        }
        for _ in 0..20 {
            rows.push(0.9 + 0.01 * (rng.gen::<f64>() - 0.5));
        }
        Array2::from_shape_vec((40, 1), rows).unwrap()
    }

    /// Direct implementation of the potential formula for cross-checking.
    fn brute_force_potentials(data: &Array2<f64>, radius: f64) -> Vec<f64> {
        let alpha = 4.0 / (radius * radius);
        (0..data.nrows())
            .map(|i| {
                (0..data.nrows())
                    .map(|j| {
                        let d2: f64 = data
                            .row(i)
                            .iter()
                            .zip(data.row(j).iter())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        (-alpha * d2).exp()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn single_point_is_its_own_center() {
        let data = array![[0.4, 0.6]];
        let centers = subtractive_cluster(&data, &ClusterConfig::default()).unwrap();
        assert_eq!(centers, vec![vec![0.4, 0.6]]);
    }

    #[test]
    fn two_blobs_give_two_centers_near_the_means() {
        let data = two_blobs();
        let centers = subtractive_cluster(&data, &ClusterConfig::default()).unwrap();
        assert_eq!(centers.len(), 2, "expected exactly 2 centers, got {centers:?}");
        let mut cs: Vec<f64> = centers.iter().map(|c| c[0]).collect();
        cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((cs[0] - 0.1).abs() < 0.05);
        assert!((cs[1] - 0.9).abs() < 0.05);
        // the first selected center is the max-potential data row
        let pot = brute_force_potentials(&data, 0.3);
        let best = pot
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(centers.iter().any(|c| c[0] == data[[best, 0]]));
    }

    #[test]
    fn wide_radius_on_a_tight_ball_gives_one_center() {
        let mut rng = stream_rng(9, 0xBA11);
        let data = Array2::from_shape_fn((25, 2), |_| 0.5 + 0.05 * (rng.gen::<f64>() - 0.5));
        let cfg = ClusterConfig { radius: 1.0, ..ClusterConfig::default() };
        let centers = subtractive_cluster(&data, &cfg).unwrap();
        assert_eq!(centers.len(), 1, "got {} centers", centers.len());
        // confirm by brute force: after removing the best center's influence,
        // no remaining potential clears the accept threshold and the gray
        // zone falls below the reject threshold
        let pot = brute_force_potentials(&data, 1.0);
        let best = pot
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let beta = 4.0 / (1.25f64 * 1.25);
        let leftover = (0..data.nrows())
            .map(|i| {
                let d2: f64 = data
                    .row(i)
                    .iter()
                    .zip(data.row(best).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                pot[i] - pot[best] * (-beta * d2).exp()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(leftover < 0.15 * pot[best], "leftover potential {leftover}");
    }

    #[test]
    fn every_center_is_a_data_row() {
        let mut rng = stream_rng(2, 0xC0);
        let data = Array2::from_shape_fn((60, 3), |_| rng.gen::<f64>());
        let centers = subtractive_cluster(&data, &ClusterConfig::default()).unwrap();
        for c in &centers {
            let found = (0..data.nrows()).any(|i| data.row(i).to_vec() == *c);
            assert!(found, "center {c:?} is not a data row");
        }
    }

    #[test]
    fn empty_data_is_rejected() {
        let data = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            subtractive_cluster(&data, &ClusterConfig::default()),
            Err(AnfisError::EmptyData)
        ));
    }

    #[test]
    fn constant_target_reduces_to_that_constant() {
        let mut rng = stream_rng(3, 0xC1);
        let inputs = Array2::from_shape_fn((30, 2), |_| rng.gen::<f64>());
        let targets = vec![0.7; 30];
        let cfg = ClusterConfig { radius: 1.0, ..ClusterConfig::default() };
        let model = AnfisModel::build(&inputs, &targets, &cfg).unwrap();
        for rule in model.rules() {
            for a in &rule.coeffs {
                assert!(a.abs() < 1e-7, "coefficient {a}");
            }
            assert!((rule.offset - 0.7).abs() < 1e-7, "offset {}", rule.offset);
        }
        for _ in 0..20 {
            let x = [rng.gen::<f64>() * 2.0 - 0.5, rng.gen::<f64>() * 2.0 - 0.5];
            let y = model.forward(&x).unwrap();
            assert!((y - 0.7).abs() < 1e-6, "forward({x:?}) = {y}");
        }
    }

    #[test]
    fn one_cluster_means_one_rule() {
        let mut rng = stream_rng(11, 0xC2);
        let inputs = Array2::from_shape_fn((25, 2), |_| 0.5 + 0.03 * (rng.gen::<f64>() - 0.5));
        let targets: Vec<f64> = (0..25).map(|i| i as f64 / 25.0).collect();
        let cfg = ClusterConfig { radius: 1.0, ..ClusterConfig::default() };
        let model = AnfisModel::build(&inputs, &targets, &cfg).unwrap();
        assert_eq!(model.rules().len(), 1);
    }

    #[test]
    fn two_blob_identity_fit_is_accurate_at_the_centers() {
        let data = two_blobs();
        let targets: Vec<f64> = data.column(0).to_vec();
        let model = AnfisModel::build(&data, &targets, &ClusterConfig::default()).unwrap();
        for c in [0.1, 0.9] {
            let y = model.forward(&[c]).unwrap();
            assert!((y - c).abs() < 0.05, "forward({c}) = {y}");
        }
    }

    #[test]
    fn single_rule_output_is_its_affine_consequent() {
        let model = AnfisModel::from_rules(
            2,
            vec![FuzzyRule {
                centers: vec![0.9, 0.9],
                sigmas: vec![0.01, 0.01],
                coeffs: vec![2.0, -1.0],
                offset: 0.25,
            }],
        )
        .unwrap();
        // membership is astronomically small at x, but normalization gives 1
        let x = [0.1, 0.3];
        let y = model.forward(&x).unwrap();
        let expected = 2.0 * 0.1 - 1.0 * 0.3 + 0.25;
        assert!((y - expected).abs() < 1e-12);
    }

    #[test]
    fn equal_rules_average_their_consequents() {
        let rule = |offset: f64| FuzzyRule {
            centers: vec![0.5],
            sigmas: vec![0.2],
            coeffs: vec![0.0],
            offset,
        };
        let model = AnfisModel::from_rules(1, vec![rule(0.0), rule(2.0)]).unwrap();
        for x in [0.0, 0.3, 0.9] {
            let y = model.forward(&[x]).unwrap();
            assert!((y - 1.0).abs() < 1e-12, "forward({x}) = {y}");
        }
    }

    #[test]
    fn hand_built_two_rule_system_matches_manual_arithmetic() {
        // independent five-layer arithmetic for a 2-rule, 1-input system
        let model = AnfisModel::from_rules(
            1,
            vec![
                FuzzyRule { centers: vec![0.2], sigmas: vec![0.3], coeffs: vec![1.5], offset: 0.1 },
                FuzzyRule { centers: vec![0.8], sigmas: vec![0.25], coeffs: vec![-0.5], offset: 1.0 },
            ],
        )
        .unwrap();
        let x = 0.45f64;
        let mu1 = (-(x - 0.2) * (x - 0.2) / (2.0 * 0.3 * 0.3)).exp();
        let mu2 = (-(x - 0.8) * (x - 0.8) / (2.0 * 0.25 * 0.25)).exp();
        let (w1, w2) = (mu1, mu2);
        let (wn1, wn2) = (w1 / (w1 + w2), w2 / (w1 + w2));
        let (g1, g2) = (1.5 * x + 0.1, -0.5 * x + 1.0);
        let expected = wn1 * g1 + wn2 * g2;
        let y = model.forward(&[x]).unwrap();
        assert!((y - expected).abs() < 1e-12, "{y} vs {expected}");
    }

    #[test]
    fn normalized_firing_strengths_sum_to_one() {
        let data = two_blobs();
        let targets: Vec<f64> = data.column(0).to_vec();
        let model = AnfisModel::build(&data, &targets, &ClusterConfig::default()).unwrap();
        let mut rng = stream_rng(4, 0xC3);
        for _ in 0..50 {
            let x = [rng.gen::<f64>()];
            let wn = model.normalized_firing(&x).unwrap();
            let sum: f64 = wn.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
        }
    }

    #[test]
    fn perfect_model_has_zero_loss_and_stays_unchanged() {
        let model = AnfisModel::from_rules(
            1,
            vec![FuzzyRule {
                centers: vec![0.5],
                sigmas: vec![0.2],
                coeffs: vec![1.0],
                offset: 0.0,
            }],
        )
        .unwrap();
        // y = x exactly (single rule => affine output)
        let inputs = Array2::from_shape_vec((5, 1), vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let targets = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let (trained, history) = model.train(&inputs, &targets, 5, 0.1).unwrap();
        assert!(history.iter().all(|l| l.abs() < 1e-24));
        assert_eq!(trained.rules(), model.rules());
    }

    #[test]
    fn training_halves_the_loss_on_a_quadratic() {
        let mut rng = stream_rng(8, 0xC4);
        let xs: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let inputs = Array2::from_shape_vec((50, 1), xs.clone()).unwrap();
        let targets: Vec<f64> = xs.iter().map(|x| x * x).collect();
        // 3-rule init with flat consequents so training has work to do
        let rule = |c: f64| FuzzyRule {
            centers: vec![c],
            sigmas: vec![0.15],
            coeffs: vec![0.0],
            offset: 0.3,
        };
        let model = AnfisModel::from_rules(1, vec![rule(0.1), rule(0.5), rule(0.9)]).unwrap();
        let (_, history) = model.train(&inputs, &targets, 30, 0.05).unwrap();
        let (first, last) = (history[0], *history.last().unwrap());
        assert!(last <= 0.5 * first, "loss {last} vs initial {first}");
        for w in history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let mut rng = stream_rng(seed, 0xC5);
            let rule = |rng: &mut rand_chacha::ChaCha8Rng| FuzzyRule {
                centers: vec![rng.gen(), rng.gen()],
                sigmas: vec![0.2 + 0.3 * rng.gen::<f64>(), 0.2 + 0.3 * rng.gen::<f64>()],
                coeffs: vec![rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5],
                offset: rng.gen::<f64>(),
            };
            let r1 = rule(&mut rng);
            let r2 = rule(&mut rng);
            let model = AnfisModel::from_rules(2, vec![r1, r2]).unwrap();
            let inputs = Array2::from_shape_fn((6, 2), |_| rng.gen::<f64>());
            let targets: Vec<f64> = (0..6).map(|_| rng.gen::<f64>()).collect();
            let (_, grad) = model.loss_and_gradient(&inputs, &targets).unwrap();
            let params = model.flat_params();
            let h = 1e-6;
            for i in 0..params.len() {
                let mut pp = params.clone();
                pp[i] += h;
                let mut pm = params.clone();
                pm[i] -= h;
                let lp =
                    model.with_flat_params(&pp).unwrap().batch_loss(&inputs, &targets).unwrap();
                let lm =
                    model.with_flat_params(&pm).unwrap().batch_loss(&inputs, &targets).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn bank_shares_structure_and_predicts_per_output() {
        let data = two_blobs();
        let mut targets = Array2::zeros((40, 2));
        for i in 0..40 {
            targets[[i, 0]] = data[[i, 0]];
            targets[[i, 1]] = 1.0 - data[[i, 0]];
        }
        let bank = AnfisBank::build(&data, &targets, &ClusterConfig::default()).unwrap();
        assert_eq!(bank.n_out(), 2);
        assert_eq!(bank.models()[0].rules().len(), bank.models()[1].rules().len());
        let y = bank.predict(&[0.1]).unwrap();
        assert!((y[0] - 0.1).abs() < 0.05);
        assert!((y[1] - 0.9).abs() < 0.05);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let data = two_blobs();
        let targets: Vec<f64> = data.column(0).to_vec();
        let model = AnfisModel::build(&data, &targets, &ClusterConfig::default()).unwrap();
        let back = AnfisModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        let bank = AnfisBank::from_models(vec![model]).unwrap();
        let back = AnfisBank::from_json(&bank.to_json()).unwrap();
        assert_eq!(back, bank);
    }

    #[test]
    fn radius_outside_unit_interval_is_rejected() {
        let data = array![[0.5]];
        for radius in [0.0, -0.3, 1.5] {
            let cfg = ClusterConfig { radius, ..ClusterConfig::default() };
            assert!(matches!(subtractive_cluster(&data, &cfg), Err(AnfisError::BadConfig(_))));
        }
    }
}
