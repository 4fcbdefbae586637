//! Encoding between raw tables and the normalized numeric space.
//!
//! Categorical columns expand to one-hot groups; numeric and ordinal columns
//! are min-max scaled into `[0, 1]` from observed values; binary and one-hot
//! slots carry fixed `(0, 1)` scale parameters. Missing raw cells fill their
//! encoded slots with a 0.5 placeholder under `mask = false`; consumers must
//! treat masked slots as unknowns, never as data.

use super::schema::{ColumnKind, Schema};
use super::table::{Cell, SurveyTable, Value};
use super::DataError;
use ndarray::Array2;

/// Placeholder written into masked slots.
pub(crate) const MISSING_PLACEHOLDER: f64 = 0.5;

/// A numerically encoded table: values in `[0, 1]`, an observation mask, the
/// per-slot scale parameters used, and the schema that shaped the encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    schema: Schema,
    values: Array2<f64>,
    mask: Array2<bool>,
    norm_params: Vec<(f64, f64)>,
}

impl EncodedMatrix {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Per-encoded-column `(min, max)` used for scaling.
    pub fn norm_params(&self) -> &[(f64, f64)] {
        &self.norm_params
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }

    pub fn row_mask(&self, i: usize) -> Vec<bool> {
        self.mask.row(i).to_vec()
    }

    /// True when every entry of the row is observed.
    pub fn row_fully_observed(&self, i: usize) -> bool {
        self.mask.row(i).iter().all(|&m| m)
    }

    /// Replaces the values and mask of a row (used by the imputer when
    /// writing back completed records).
    pub(crate) fn set_row(&mut self, i: usize, values: &[f64], mask: &[bool]) {
        assert_eq!(values.len(), self.width());
        for j in 0..self.width() {
            self.values[[i, j]] = values[j];
            self.mask[[i, j]] = mask[j];
        }
    }

    /// A new matrix containing only the rows at `indices`.
    pub fn subset(&self, indices: &[usize]) -> EncodedMatrix {
        let w = self.width();
        let mut values = Array2::zeros((indices.len(), w));
        let mut mask = Array2::from_elem((indices.len(), w), true);
        for (out, &i) in indices.iter().enumerate() {
            for j in 0..w {
                values[[out, j]] = self.values[[i, j]];
                mask[[out, j]] = self.mask[[i, j]];
            }
        }
        EncodedMatrix {
            schema: self.schema.clone(),
            values,
            mask,
            norm_params: self.norm_params.clone(),
        }
    }

    /// Rows that are fully observed, as a dense matrix of values.
    pub fn observed_rows(&self) -> Array2<f64> {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| self.row_fully_observed(i)).collect();
        let mut out = Array2::zeros((rows.len(), self.width()));
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..self.width() {
                out[[r, j]] = self.values[[i, j]];
            }
        }
        out
    }
}

/// Computes per-encoded-column scale parameters from the observed values of
/// the rows at `rows` (all rows when empty). Numeric and ordinal columns get
/// their observed min/max; binary and one-hot slots get the fixed `(0, 1)`.
pub fn norm_params_for(table: &SurveyTable, rows: &[usize]) -> Result<Vec<(f64, f64)>, DataError> {
    let schema = table.schema();
    let all_rows: Vec<usize>;
    let rows = if rows.is_empty() {
        all_rows = (0..table.n_rows()).collect();
        &all_rows
    } else {
        rows
    };
    let mut params = Vec::with_capacity(schema.encoded_width());
    for (c, col) in schema.columns().iter().enumerate() {
        match &col.kind {
            ColumnKind::Numeric { .. } | ColumnKind::Ordinal { .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut seen = false;
                for &r in rows {
                    if let Some(Value::Number(v)) = table.cell(r, c) {
                        lo = lo.min(*v);
                        hi = hi.max(*v);
                        seen = true;
                    }
                }
                if !seen {
                    return Err(DataError::BadCell {
                        row: 0,
                        column: col.name.clone(),
                        reason: "no observed values to scale from".into(),
                    });
                }
                if lo == hi {
                    return Err(DataError::ColumnConstant(col.name.clone()));
                }
                params.push((lo, hi));
            }
            ColumnKind::Binary => params.push((0.0, 1.0)),
            ColumnKind::Categorical { labels } => {
                for _ in 0..labels.len() {
                    params.push((0.0, 1.0));
                }
            }
        }
    }
    Ok(params)
}

/// Encodes a table using scale parameters computed from its own observed
/// values. Requires at least 2 rows and one observed value per column.
pub fn encode(table: &SurveyTable) -> Result<EncodedMatrix, DataError> {
    if table.n_rows() < 2 {
        return Err(DataError::TooFewRows { need: 2, got: table.n_rows() });
    }
    let params = norm_params_for(table, &[])?;
    encode_with_norm(table, &params)
}

/// Encodes a table with the given scale parameters (typically computed from
/// the training partition). Values falling outside the scale range are
/// clamped into `[0, 1]`.
pub fn encode_with_norm(
    table: &SurveyTable,
    norm_params: &[(f64, f64)],
) -> Result<EncodedMatrix, DataError> {
    let schema = table.schema();
    let width = schema.encoded_width();
    if norm_params.len() != width {
        return Err(DataError::ShapeMismatch(format!(
            "{} norm params for encoded width {width}",
            norm_params.len()
        )));
    }
    for (j, (lo, hi)) in norm_params.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            let col = schema.column_of_slot(j);
            return Err(DataError::ColumnConstant(schema.columns()[col].name.clone()));
        }
    }
    let n = table.n_rows();
    let mut values = Array2::from_elem((n, width), MISSING_PLACEHOLDER);
    let mut mask = Array2::from_elem((n, width), false);
    for (c, col) in schema.columns().iter().enumerate() {
        let slots = schema.slot_range(c);
        for r in 0..n {
            match table.cell(r, c) {
                None => {} // placeholder + mask=false already set
                Some(Value::Number(v)) => {
                    let (lo, hi) = norm_params[slots.start];
                    let scaled = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                    values[[r, slots.start]] = scaled;
                    mask[[r, slots.start]] = true;
                }
                Some(Value::Label(l)) => {
                    let labels = match &col.kind {
                        ColumnKind::Categorical { labels } => labels,
                        _ => unreachable!("validated at table construction"),
                    };
                    let idx = labels.iter().position(|x| x == l).ok_or_else(|| {
                        DataError::UnknownLabel { column: col.name.clone(), label: l.clone() }
                    })?;
                    for (k, j) in slots.clone().enumerate() {
                        values[[r, j]] = if k == idx { 1.0 } else { 0.0 };
                        mask[[r, j]] = true;
                    }
                }
            }
        }
    }
    Ok(EncodedMatrix { schema: schema.clone(), values, mask, norm_params: norm_params.to_vec() })
}

/// Decodes an encoded matrix back to raw cells: inverse min-max for scalar
/// slots (ordinals rounded to the nearest level, binaries thresholded at
/// 0.5), argmax over each one-hot group. Masked raw columns decode to
/// missing cells.
pub fn decode(matrix: &EncodedMatrix, schema: &Schema) -> Result<SurveyTable, DataError> {
    if schema != matrix.schema() {
        return Err(DataError::ShapeMismatch(
            "schema does not match the one the matrix was encoded with".into(),
        ));
    }
    let n = matrix.n_rows();
    let mut rows: Vec<Vec<Cell>> = Vec::with_capacity(n);
    for r in 0..n {
        let mut row: Vec<Cell> = Vec::with_capacity(schema.n_columns());
        for (c, col) in schema.columns().iter().enumerate() {
            let slots = schema.slot_range(c);
            let observed = slots.clone().all(|j| matrix.mask[[r, j]]);
            if !observed {
                row.push(None);
                continue;
            }
            let cell = match &col.kind {
                ColumnKind::Categorical { labels } => {
                    let (best, _) = slots
                        .clone()
                        .enumerate()
                        .map(|(k, j)| (k, matrix.values[[r, j]]))
                        .fold((0usize, f64::NEG_INFINITY), |acc, (k, v)| {
                            if v > acc.1 {
                                (k, v)
                            } else {
                                acc
                            }
                        });
                    Value::Label(labels[best].clone())
                }
                kind => {
                    let (lo, hi) = matrix.norm_params[slots.start];
                    let raw = lo + matrix.values[[r, slots.start]] * (hi - lo);
                    let v = match kind {
                        ColumnKind::Ordinal { levels } => {
                            raw.round().clamp(0.0, (*levels - 1) as f64)
                        }
                        ColumnKind::Binary => {
                            if raw >= 0.5 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        _ => raw,
                    };
                    Value::Number(v)
                }
            };
            row.push(Some(cell));
        }
        rows.push(row);
    }
    SurveyTable::new(schema.clone(), rows)
}
