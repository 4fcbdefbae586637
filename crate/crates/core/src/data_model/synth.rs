//! Synthetic survey generation via a Gaussian copula.
//!
//! One latent standard normal per raw column, correlated per the spec, mapped
//! through monotone transforms to each column's marginal. Cross-column
//! dependence makes MAR estimation possible; ratio pairs keep logical rules
//! (parity <= gravidity) satisfied by construction.

use super::schema::{ColumnKind, Schema};
use super::table::{Cell, SurveyTable, Value};
use super::DataError;
use crate::seeding::{standard_normal, stream_rng, STREAM_DATA};

/// Marginal shape applied to a column's latent draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// Plain uniform over the column range.
    Uniform,
    /// `u^a` before range mapping: `a > 1` skews right, `a < 1` skews left.
    Power(f64),
    /// Right-skewed: `lo + range * median_frac * exp(sigma * z)`, clamped to
    /// the column range. Median sits at `lo + range * median_frac`.
    LogNormalish { median_frac: f64, sigma: f64 },
}

/// Target dependence between two columns, as Pearson correlation on the
/// uniform copula scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPair {
    pub a: String,
    pub b: String,
    pub rho: f64,
}

/// Full generator specification.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthSpec {
    pub correlations: Vec<CorrelationPair>,
    /// Per-column marginal overrides; unlisted columns are [`Marginal::Uniform`].
    pub marginals: Vec<(String, Marginal)>,
    /// Positive rate per binary column; unlisted binaries use 0.5.
    pub binary_rates: Vec<(String, f64)>,
    /// `(smaller, larger)`: the smaller column is generated as a fraction of
    /// the larger one, enforcing `smaller <= larger` by construction.
    pub ratio_pairs: Vec<(String, String)>,
}

/// Generator spec tuned for [`super::default_schema`]: a right-skewed age
/// (mean above median), education biased toward the upper grades,
/// pregnancy counts tied to age, and parity bounded by gravidity.
pub fn default_synth_spec() -> SynthSpec {
    SynthSpec {
        correlations: vec![
            CorrelationPair { a: "age".into(), b: "gravidity".into(), rho: 0.6 },
            CorrelationPair { a: "age".into(), b: "education".into(), rho: 0.35 },
            CorrelationPair { a: "education".into(), b: "hiv".into(), rho: -0.25 },
            CorrelationPair { a: "gravidity".into(), b: "clinic_visit".into(), rho: 0.3 },
        ],
        marginals: vec![
            ("age".into(), Marginal::LogNormalish { median_frac: 0.342, sigma: 0.4 }),
            ("education".into(), Marginal::Power(0.42)),
            ("gravidity".into(), Marginal::Power(2.0)),
            ("parity".into(), Marginal::Power(0.6)),
        ],
        binary_rates: vec![("hiv".into(), 0.2), ("clinic_visit".into(), 0.7)],
        ratio_pairs: vec![("parity".into(), "gravidity".into())],
    }
}

/// Standard normal CDF (Abramowitz & Stegun 7.1.26 rational approximation;
/// absolute error below 1e-7, strictly monotone).
fn normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf_abs = 1.0 - poly * (-x * x).exp();
    let erf = if x >= 0.0 { erf_abs } else { -erf_abs };
    0.5 * (1.0 + erf)
}

/// Lower-triangular Cholesky factor; `None` when not positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn latent_correlation_matrix(schema: &Schema, spec: &SynthSpec) -> Result<Vec<Vec<f64>>, DataError> {
    let d = schema.n_columns();
    let mut m = vec![vec![0.0; d]; d];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for pair in &spec.correlations {
        let i = schema
            .column_index(&pair.a)
            .ok_or_else(|| DataError::UnknownColumn(pair.a.clone()))?;
        let j = schema
            .column_index(&pair.b)
            .ok_or_else(|| DataError::UnknownColumn(pair.b.clone()))?;
        if i == j {
            return Err(DataError::BadCorrelationSpec(format!(
                "self-correlation on `{}`",
                pair.a
            )));
        }
        if !pair.rho.is_finite() || pair.rho.abs() >= 1.0 {
            return Err(DataError::BadCorrelationSpec(format!(
                "rho {} for {}~{} outside (-1, 1)",
                pair.rho, pair.a, pair.b
            )));
        }
        // Calibration from target uniform-scale correlation to the latent
        // normal correlation that produces it.
        let latent = 2.0 * ((std::f64::consts::PI * pair.rho / 6.0).sin());
        m[i][j] = latent;
        m[j][i] = latent;
    }
    Ok(m)
}

fn marginal_for<'a>(spec: &'a SynthSpec, name: &str) -> &'a Marginal {
    spec.marginals
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, m)| m)
        .unwrap_or(&Marginal::Uniform)
}

fn binary_rate(spec: &SynthSpec, name: &str) -> f64 {
    spec.binary_rates
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, r)| *r)
        .unwrap_or(0.5)
}

fn shape_u(marginal: &Marginal, u: f64) -> f64 {
    match marginal {
        Marginal::Uniform => u,
        Marginal::Power(a) => u.powf(*a),
        // LogNormalish is applied on the z scale, not here.
        Marginal::LogNormalish { .. } => u,
    }
}

/// Generates `n` mutually dependent, rule-consistent rows.
pub fn synthesize(
    schema: &Schema,
    n: usize,
    seed: u64,
    spec: &SynthSpec,
) -> Result<SurveyTable, DataError> {
    if n == 0 {
        return Err(DataError::TooFewRows { need: 1, got: 0 });
    }
    for (small, large) in &spec.ratio_pairs {
        for name in [small, large] {
            schema
                .column_index(name)
                .ok_or_else(|| DataError::UnknownColumn(name.clone()))?;
        }
    }
    for (name, rate) in &spec.binary_rates {
        schema
            .column_index(name)
            .ok_or_else(|| DataError::UnknownColumn(name.clone()))?;
        if !(0.0..=1.0).contains(rate) {
            return Err(DataError::BadCorrelationSpec(format!(
                "binary rate {rate} for `{name}` outside [0, 1]"
            )));
        }
    }
    let corr = latent_correlation_matrix(schema, spec)?;
    let chol = cholesky(&corr).ok_or_else(|| {
        DataError::BadCorrelationSpec("correlation matrix is not positive definite".into())
    })?;

    let d = schema.n_columns();
    let mut rng = stream_rng(seed, STREAM_DATA);
    let mut rows: Vec<Vec<Cell>> = Vec::with_capacity(n);
    let mut z = vec![0.0f64; d];
    let mut eps = vec![0.0f64; d];
    for _ in 0..n {
        for e in eps.iter_mut() {
            *e = standard_normal(&mut rng);
        }
        for i in 0..d {
            z[i] = (0..=i).map(|k| chol[i][k] * eps[k]).sum();
        }
        let mut row: Vec<Cell> = Vec::with_capacity(d);
        for (c, col) in schema.columns().iter().enumerate() {
            let u = normal_cdf(z[c]);
            let marginal = marginal_for(spec, &col.name);
            let value = match &col.kind {
                ColumnKind::Numeric { min, max } => match marginal {
                    Marginal::LogNormalish { median_frac, sigma } => {
                        let raw = min + (max - min) * median_frac * (sigma * z[c]).exp();
                        Value::Number(raw.clamp(*min, *max))
                    }
                    m => Value::Number(min + (max - min) * shape_u(m, u)),
                },
                ColumnKind::Ordinal { levels } => {
                    let k = (shape_u(marginal, u) * *levels as f64).floor();
                    Value::Number(k.min((*levels - 1) as f64))
                }
                ColumnKind::Binary => {
                    let rate = binary_rate(spec, &col.name);
                    Value::Number(if u > 1.0 - rate { 1.0 } else { 0.0 })
                }
                ColumnKind::Categorical { labels } => {
                    let k = ((u * labels.len() as f64).floor() as usize).min(labels.len() - 1);
                    Value::Label(labels[k].clone())
                }
            };
            row.push(Some(value));
        }
        // Ratio pairs override the smaller column with a fraction of the
        // larger one, using the smaller column's own latent for the fraction.
        for (small, large) in &spec.ratio_pairs {
            let si = schema.column_index(small).unwrap();
            let li = schema.column_index(large).unwrap();
            let large_v = match &row[li] {
                Some(Value::Number(v)) => *v,
                _ => continue,
            };
            let frac = shape_u(marginal_for(spec, small), normal_cdf(z[si]));
            row[si] = Some(Value::Number(large_v * frac));
        }
        rows.push(row);
    }
    SurveyTable::new(schema.clone(), rows)
}
