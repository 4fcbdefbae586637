//! Principal component analysis over encoded survey data.
//!
//! Fits by mean-centering, forming the sample covariance (divisor `n - 1`),
//! and eigendecomposing it with cyclic Jacobi rotations — exact and simple at
//! this dimensionality (d <= 13). The retained top-k eigenvectors form the
//! compression map; its transpose plus the original mean reconstructs.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 rows to fit, got {0}")]
    DegenerateData(usize),
    #[error("component count {k} outside 1..={d}")]
    BadComponentCount { k: usize, d: usize },
    #[error("vector length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("all eigenvalues are zero; composition undefined")]
    AllZeroVariance,
}

/// A fitted PCA: the data mean, the top-k eigenvectors (rows, descending
/// eigenvalue order) and the full descending eigenvalue list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    format: String,
    original_mean: Vec<f64>,
    feature_vector: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns,
/// unordered.
fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let d = a.nrows();
    let mut m = a.clone();
    let mut v: Array2<f64> = Array2::eye(d);
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|p| (p + 1..d).map(move |q| (p, q)))
            .map(|(p, q)| m[[p, q]] * m[[p, q]])
            .sum();
        if off.sqrt() < 1e-14 * norm {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues = (0..d).map(|i| m[[i, i]]).collect();
    (eigenvalues, v)
}

impl PcaModel {
    /// Fits on an `n x d` matrix, keeping the top `k` components.
    pub fn fit(data: &Array2<f64>, k: usize) -> Result<Self, PcaError> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(PcaError::DegenerateData(n));
        }
        if k == 0 || k > d {
            return Err(PcaError::BadComponentCount { k, d });
        }
        let mean: Array1<f64> = data.mean_axis(ndarray::Axis(0)).expect("n >= 2");
        let centered = data - &mean.view().insert_axis(ndarray::Axis(0));
        let mut cov = centered.t().dot(&centered) / (n as f64 - 1.0);
        // guard against asymmetry drift from the matrix product
        for i in 0..d {
            for j in i + 1..d {
                let s = 0.5 * (cov[[i, j]] + cov[[j, i]]);
                cov[[i, j]] = s;
                cov[[j, i]] = s;
            }
        }
        let (eigenvalues, vectors) = jacobi_eigen(&cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
        let sorted_values: Vec<f64> = order.iter().map(|&i| eigenvalues[i].max(0.0)).collect();
        let mut feature_vector = Vec::with_capacity(k);
        for &col in order.iter().take(k) {
            let mut row: Vec<f64> = (0..d).map(|r| vectors[[r, col]]).collect();
            // sign convention: largest-magnitude entry positive
            let lead = row
                .iter()
                .cloned()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                for x in row.iter_mut() {
                    *x = -*x;
                }
            }
            feature_vector.push(row);
        }
        Ok(Self {
            format: "pca-v1".into(),
            original_mean: mean.to_vec(),
            feature_vector,
            eigenvalues: sorted_values,
        })
    }

    pub fn dim(&self) -> usize {
        self.original_mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.feature_vector.len()
    }

    pub fn original_mean(&self) -> &[f64] {
        &self.original_mean
    }

    /// Retained eigenvector rows, descending eigenvalue order.
    pub fn feature_vector(&self) -> &[Vec<f64>] {
        &self.feature_vector
    }

    /// All `d` eigenvalues, descending, clamped at zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Projects a point onto the retained components: `F (x - mean)`.
    pub fn compress(&self, x: &[f64]) -> Result<Vec<f64>, PcaError> {
        if x.len() != self.dim() {
            return Err(PcaError::LengthMismatch { got: x.len(), expected: self.dim() });
        }
        Ok(self
            .feature_vector
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x.iter().zip(&self.original_mean))
                    .map(|(f, (xi, mi))| f * (xi - mi))
                    .sum()
            })
            .collect())
    }

    /// Maps a compressed point back: `F^T z + mean`.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>, PcaError> {
        if z.len() != self.n_components() {
            return Err(PcaError::LengthMismatch { got: z.len(), expected: self.n_components() });
        }
        let mut out = self.original_mean.clone();
        for (row, zi) in self.feature_vector.iter().zip(z) {
            for (o, f) in out.iter_mut().zip(row) {
                *o += f * zi;
            }
        }
        Ok(out)
    }

    /// Percentage of total variance carried by each component, in order.
    pub fn component_composition(&self) -> Result<Vec<f64>, PcaError> {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return Err(PcaError::AllZeroVariance);
        }
        Ok(self.eigenvalues.iter().map(|e| e / total * 100.0).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pca serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
