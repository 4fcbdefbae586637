//! Imputation scoring and the global statistical-impact suite.
//!
//! Accuracy is scored in raw units after decoding: per-column tolerance
//! classes (e.g. years of age), binary classification accuracy, and RMSE.
//! The impact suite compares an actual and an imputed table column by
//! column — mean/median/spread, distribution histograms, actual-vs-imputed
//! correlation, paired quantiles, principal-component composition, and the
//! accuracy of a downstream classifier fed either table.

use crate::anfis::AnfisBank;
use crate::data_model::{encode_with_norm, ColumnKind, SurveyTable, Value};
use crate::imputer::Regressor;
use crate::mlp::MlpModel;
use crate::pca::PcaModel;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("vector lengths disagree: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("input is constant; correlation undefined")]
    ConstantInput,
    #[error("empty total; accuracy undefined")]
    EmptyTotal,
    #[error("tolerance widths must be positive and strictly increasing")]
    BadWidths,
    #[error("tables disagree: {0}")]
    SchemaMismatch(String),
    #[error("model error: {0}")]
    Model(String),
}

/// Root mean square error.
pub fn rmse(actual: &[f64], imputed: &[f64]) -> Result<f64, MetricsError> {
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    if actual.len() != imputed.len() {
        return Err(MetricsError::LengthMismatch(actual.len(), imputed.len()));
    }
    let sum: f64 = actual.iter().zip(imputed).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// Percentage of predictions within each tolerance width; non-decreasing
/// across widths.
pub fn tolerance_accuracy(
    actual: &[f64],
    imputed: &[f64],
    widths: &[f64],
) -> Result<Vec<f64>, MetricsError> {
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    if actual.len() != imputed.len() {
        return Err(MetricsError::LengthMismatch(actual.len(), imputed.len()));
    }
    if widths.is_empty()
        || widths[0] <= 0.0
        || widths.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(MetricsError::BadWidths);
    }
    let n = actual.len() as f64;
    Ok(widths
        .iter()
        .map(|&w| {
            let hits = actual
                .iter()
                .zip(imputed)
                .filter(|(a, b)| (**a - **b).abs() <= w)
                .count();
            100.0 * hits as f64 / n
        })
        .collect())
}

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }
}

/// Counts agreement between actual labels and predictions, both thresholded
/// at `threshold` (value >= threshold reads as positive).
pub fn confusion_counts(actual: &[f64], predicted: &[f64], threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (a, p) in actual.iter().zip(predicted) {
        match (*a >= threshold, *p >= threshold) {
            (true, true) => c.true_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_pos += 1,
            (true, false) => c.false_neg += 1,
        }
    }
    c
}

/// Percentage of correct binary classifications:
/// `100 (TP + TN) / (TP + TN + FP + FN)`.
pub fn classification_accuracy(counts: &ConfusionCounts) -> Result<f64, MetricsError> {
    let total = counts.total();
    if total == 0 {
        return Err(MetricsError::EmptyTotal);
    }
    Ok(100.0 * (counts.true_pos + counts.true_neg) as f64 / total as f64)
}

/// Mean, median and sample standard deviation (divisor `n - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

pub fn summary_stats(column: &[f64]) -> Result<SummaryStats, MetricsError> {
    if column.len() < 2 {
        return Err(MetricsError::TooFew { need: 2, got: column.len() });
    }
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(SummaryStats { mean, median, std: var.max(0.0).sqrt() })
}

/// An empirical distribution: `n_bins + 1` edges and per-bin masses summing
/// to one. The maximum value counts into the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

pub fn pdf_histogram(column: &[f64], n_bins: usize) -> Result<Histogram, MetricsError> {
    if column.is_empty() || n_bins == 0 {
        return Err(MetricsError::Empty);
    }
    let lo = column.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    pdf_histogram_with_range(column, n_bins, lo, hi)
}

/// Histogram over an explicit `[lo, hi]` span (used to bin two samples the
/// same way). A degenerate span widens to `±0.5` around the value.
pub fn pdf_histogram_with_range(
    column: &[f64],
    n_bins: usize,
    lo: f64,
    hi: f64,
) -> Result<Histogram, MetricsError> {
    if column.is_empty() || n_bins == 0 {
        return Err(MetricsError::Empty);
    }
    let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0usize; n_bins];
    for &x in column {
        let idx = (((x - lo) / width).floor() as isize).clamp(0, n_bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let n = column.len() as f64;
    Ok(Histogram { edges, masses: counts.iter().map(|&c| c as f64 / n).collect() })
}

/// Pearson correlation coefficient in `[-1, 1]`. Exact linear relationships
/// return exactly ±1 (detected through the Cauchy-Schwarz equality on the
/// accumulated sums).
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricsError::TooFew { need: 2, got: a.len() });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - ma;
        let db = y - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::ConstantInput);
    }
    if sab * sab == saa * sbb {
        return Ok(1.0f64.copysign(sab));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Paired empirical quantiles at probabilities `i / (n_quantiles + 1)`,
/// linearly interpolated. A sample against itself lies on the diagonal.
pub fn qq_points(
    a: &[f64],
    b: &[f64],
    n_quantiles: usize,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    if a.is_empty() || b.is_empty() || n_quantiles == 0 {
        return Err(MetricsError::Empty);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let quantile = |sorted: &[f64], p: f64| -> f64 {
        let h = p * (sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        if lo == hi {
            sorted[lo]
        } else {
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    };
    Ok((1..=n_quantiles)
        .map(|i| {
            let p = i as f64 / (n_quantiles + 1) as f64;
            (quantile(&sa, p), quantile(&sb, p))
        })
        .collect())
}

/// Tolerance classes per raw column, widths in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTolerance {
    pub column: String,
    pub widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub columns: Vec<ColumnTolerance>,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            columns: vec![
                ColumnTolerance { column: "age".into(), widths: vec![2.0, 4.0, 6.0] },
                ColumnTolerance { column: "education".into(), widths: vec![1.0, 2.0, 3.0] },
            ],
        }
    }
}

impl ToleranceSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for c in &self.columns {
            if c.widths.is_empty()
                || c.widths[0] <= 0.0
                || c.widths.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(MetricsError::BadWidths);
            }
        }
        Ok(())
    }

    pub fn widths_for(&self, column: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.column == column)
            .map(|c| c.widths.as_slice())
    }
}

/// Classifiers trained on the original training partition to predict a
/// binary target column from every other column, plus the scale parameters
/// the training pipeline used (needed to encode new tables consistently).
pub struct DownstreamClassifiers {
    pub mlp: MlpModel,
    pub anfis: AnfisBank,
    pub target_column: String,
    pub norm_params: Vec<(f64, f64)>,
}

/// Impact suite knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactConfig {
    pub n_bins: usize,
    pub n_quantiles: usize,
    /// Components kept when fitting the composition PCA (eigenvalues are
    /// always reported for every dimension).
    pub pca_components: usize,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self { n_bins: 20, n_quantiles: 50, pca_components: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnImpact {
    pub column: String,
    pub actual_mean: f64,
    pub imputed_mean: f64,
    pub actual_median: f64,
    pub imputed_median: f64,
    pub actual_std: f64,
    pub imputed_std: f64,
    /// Pearson correlation between actual and imputed values over the rows
    /// that differ between the tables (all rows when none differ); absent
    /// when either side is constant there.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnHistograms {
    pub column: String,
    pub actual: Histogram,
    pub imputed: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnQq {
    pub column: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationImpact {
    pub mlp_actual_acc: f64,
    pub mlp_imputed_acc: f64,
    pub anfis_actual_acc: f64,
    pub anfis_imputed_acc: f64,
}

/// The full statistical comparison between an actual and an imputed table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub columns: Vec<ColumnImpact>,
    pub histograms: Vec<ColumnHistograms>,
    pub qq: Vec<ColumnQq>,
    pub pca_composition_actual: Vec<f64>,
    pub pca_composition_imputed: Vec<f64>,
    pub classification: ClassificationImpact,
}

fn numeric_columns(table: &SurveyTable) -> Vec<(usize, String)> {
    table
        .schema()
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| !matches!(c.kind, ColumnKind::Categorical { .. }))
        .map(|(i, c)| (i, c.name.clone()))
        .collect()
}

fn column_values(table: &SurveyTable, col: usize) -> Vec<f64> {
    table
        .rows()
        .iter()
        .map(|row| match &row[col] {
            Some(Value::Number(v)) => *v,
            _ => f64::NAN,
        })
        .collect()
}

fn classifier_accuracy(
    net: &dyn Regressor,
    table: &SurveyTable,
    labels: &[f64],
    target_slot: usize,
    norm_params: &[(f64, f64)],
) -> Result<f64, MetricsError> {
    let encoded =
        encode_with_norm(table, norm_params).map_err(|e| MetricsError::Model(e.to_string()))?;
    let mut predictions = Vec::with_capacity(encoded.n_rows());
    for i in 0..encoded.n_rows() {
        let row = encoded.row(i);
        let inputs: Vec<f64> = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != target_slot)
            .map(|(_, v)| *v)
            .collect();
        let out = net.predict(&inputs).map_err(|e| MetricsError::Model(e.to_string()))?;
        predictions.push(out[0]);
    }
    classification_accuracy(&confusion_counts(labels, &predictions, 0.5))
}

/// Assembles the statistical impact of imputation: per-column summary
/// statistics and correlations, shared-bin histograms, paired quantiles,
/// principal-component composition of both tables, and downstream
/// classification accuracy on each.
pub fn impact_report(
    actual: &SurveyTable,
    imputed: &SurveyTable,
    classifiers: &DownstreamClassifiers,
    cfg: &ImpactConfig,
) -> Result<ImpactReport, MetricsError> {
    if actual.schema() != imputed.schema() {
        return Err(MetricsError::SchemaMismatch("different schemas".into()));
    }
    if actual.n_rows() != imputed.n_rows() {
        return Err(MetricsError::SchemaMismatch(format!(
            "{} vs {} rows",
            actual.n_rows(),
            imputed.n_rows()
        )));
    }
    let schema = actual.schema();

    // rows where any cell differs stand in for the imputed-row set
    let differing: Vec<usize> = (0..actual.n_rows())
        .filter(|&i| actual.rows()[i] != imputed.rows()[i])
        .collect();

    let mut columns = Vec::new();
    let mut histograms = Vec::new();
    let mut qq = Vec::new();
    for (col, name) in numeric_columns(actual) {
        let a = column_values(actual, col);
        let b = column_values(imputed, col);
        if a.iter().chain(&b).any(|v| v.is_nan()) {
            return Err(MetricsError::SchemaMismatch(format!(
                "column `{name}` has missing cells; impact needs complete tables"
            )));
        }
        let sa = summary_stats(&a)?;
        let sb = summary_stats(&b)?;
        let (ca, cb): (Vec<f64>, Vec<f64>) = if differing.len() >= 2 {
            (
                differing.iter().map(|&i| a[i]).collect(),
                differing.iter().map(|&i| b[i]).collect(),
            )
        } else {
            (a.clone(), b.clone())
        };
        let corr = match correlation(&ca, &cb) {
            Ok(r) => Some(r),
            Err(MetricsError::ConstantInput) => None,
            Err(e) => return Err(e),
        };
        columns.push(ColumnImpact {
            column: name.clone(),
            actual_mean: sa.mean,
            imputed_mean: sb.mean,
            actual_median: sa.median,
            imputed_median: sb.median,
            actual_std: sa.std,
            imputed_std: sb.std,
            correlation: corr,
        });
        let lo = a.iter().chain(&b).cloned().fold(f64::INFINITY, f64::min);
        let hi = a.iter().chain(&b).cloned().fold(f64::NEG_INFINITY, f64::max);
        histograms.push(ColumnHistograms {
            column: name.clone(),
            actual: pdf_histogram_with_range(&a, cfg.n_bins, lo, hi)?,
            imputed: pdf_histogram_with_range(&b, cfg.n_bins, lo, hi)?,
        });
        qq.push(ColumnQq { column: name, points: qq_points(&a, &b, cfg.n_quantiles)? });
    }

    // component composition over identically scaled encodings of both tables
    let composition = |table: &SurveyTable| -> Result<Vec<f64>, MetricsError> {
        let encoded = encode_with_norm(table, &classifiers.norm_params)
            .map_err(|e| MetricsError::Model(e.to_string()))?;
        let pca = PcaModel::fit(encoded.values(), cfg.pca_components.max(1))
            .map_err(|e| MetricsError::Model(e.to_string()))?;
        pca.component_composition().map_err(|e| MetricsError::Model(e.to_string()))
    };
    let pca_composition_actual = composition(actual)?;
    let pca_composition_imputed = composition(imputed)?;

    // downstream classification: labels always come from the actual table
    let target_col = schema
        .column_index(&classifiers.target_column)
        .ok_or_else(|| MetricsError::SchemaMismatch(format!(
            "target column `{}` not in schema",
            classifiers.target_column
        )))?;
    let target_slot = schema.slot_range(target_col).start;
    let labels = column_values(actual, target_col);
    let classification = ClassificationImpact {
        mlp_actual_acc: classifier_accuracy(
            &classifiers.mlp,
            actual,
            &labels,
            target_slot,
            &classifiers.norm_params,
        )?,
        mlp_imputed_acc: classifier_accuracy(
            &classifiers.mlp,
            imputed,
            &labels,
            target_slot,
            &classifiers.norm_params,
        )?,
        anfis_actual_acc: classifier_accuracy(
            &classifiers.anfis,
            actual,
            &labels,
            target_slot,
            &classifiers.norm_params,
        )?,
        anfis_imputed_acc: classifier_accuracy(
            &classifiers.anfis,
            imputed,
            &labels,
            target_slot,
            &classifiers.norm_params,
        )?,
    };

    Ok(ImpactReport {
        columns,
        histograms,
        qq,
        pca_composition_actual,
        pca_composition_imputed,
        classification,
    })
}

impl ImpactReport {
    /// Writes the report set: `report.json` plus flat CSVs per figure-style
    /// artifact (histogram, quantile pairs, component composition, summary
    /// statistics). Returns every path written.
    pub fn write_files(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut emit = |name: String, content: String| -> std::io::Result<()> {
            let path = dir.join(name);
            let mut f = std::fs::File::create(&path)?;
            f.write_all(content.as_bytes())?;
            written.push(path);
            Ok(())
        };

        emit("report.json".into(), serde_json::to_string_pretty(self).expect("serializes"))?;

        let mut stats = String::from(
            "column,actual_mean,imputed_mean,actual_median,imputed_median,actual_std,imputed_std,correlation\n",
        );
        for c in &self.columns {
            let corr = c.correlation.map(|r| r.to_string()).unwrap_or_default();
            stats.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.column,
                c.actual_mean,
                c.imputed_mean,
                c.actual_median,
                c.imputed_median,
                c.actual_std,
                c.imputed_std,
                corr
            ));
        }
        emit("summary_stats.csv".into(), stats)?;

        for h in &self.histograms {
            let mut csv = String::from("bin_lo,bin_hi,actual_mass,imputed_mass\n");
            for i in 0..h.actual.masses.len() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    h.actual.edges[i],
                    h.actual.edges[i + 1],
                    h.actual.masses[i],
                    h.imputed.masses[i]
                ));
            }
            emit(format!("histogram_{}.csv", h.column), csv)?;
        }

        for q in &self.qq {
            let mut csv = String::from("actual_quantile,imputed_quantile\n");
            for (a, b) in &q.points {
                csv.push_str(&format!("{a},{b}\n"));
            }
            emit(format!("qq_{}.csv", q.column), csv)?;
        }

        let mut comp = String::from("component,actual_pct,imputed_pct\n");
        for (i, (a, b)) in self
            .pca_composition_actual
            .iter()
            .zip(&self.pca_composition_imputed)
            .enumerate()
        {
            comp.push_str(&format!("{},{},{}\n", i + 1, a, b));
        }
        emit("composition.csv".into(), comp)?;

        Ok(written)
    }
}
