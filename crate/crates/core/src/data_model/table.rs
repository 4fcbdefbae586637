//! Raw survey tables, CSV I/O and logical outlier rules.

use super::schema::{ColumnKind, Schema};
use super::DataError;
use std::io::{Read, Write};

/// A raw cell value: a number (numeric/ordinal/binary columns) or a label.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Label(String),
}

/// A cell; `None` means missing.
pub type Cell = Option<Value>;

/// A raw survey table whose rows conform to a [`Schema`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyTable {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
}

fn check_cell(kind: &ColumnKind, value: &Value, row: usize, column: &str) -> Result<(), DataError> {
    let bad = |reason: String| {
        Err(DataError::BadCell {
            row,
            column: column.to_string(),
            reason,
        })
    };
    match (kind, value) {
        (ColumnKind::Numeric { min, max }, Value::Number(v)) => {
            if !v.is_finite() || *v < *min || *v > *max {
                return bad(format!("{v} outside numeric range {min}..{max}"));
            }
        }
        (ColumnKind::Ordinal { levels }, Value::Number(v)) => {
            if v.fract() != 0.0 || *v < 0.0 || *v >= *levels as f64 {
                return bad(format!("{v} is not an ordinal level in 0..{levels}"));
            }
        }
        (ColumnKind::Binary, Value::Number(v)) => {
            if *v != 0.0 && *v != 1.0 {
                return bad(format!("{v} is not binary"));
            }
        }
        (ColumnKind::Categorical { labels }, Value::Label(l)) => {
            if !labels.iter().any(|x| x == l) {
                return Err(DataError::UnknownLabel {
                    column: column.to_string(),
                    label: l.clone(),
                });
            }
        }
        (ColumnKind::Categorical { .. }, Value::Number(v)) => {
            return bad(format!("expected a label, got number {v}"));
        }
        (_, Value::Label(l)) => {
            return bad(format!("expected a number, got label `{l}`"));
        }
    }
    Ok(())
}

impl SurveyTable {
    /// Builds a table, validating every non-missing cell against the schema.
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self, DataError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.n_columns() {
                return Err(DataError::ShapeMismatch(format!(
                    "row {i} has {} cells, schema has {} columns",
                    row.len(),
                    schema.n_columns()
                )));
            }
            for (c, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    check_cell(&schema.columns()[c].kind, v, i, &schema.columns()[c].name)?;
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    /// Numeric view of a column (numeric/ordinal/binary kinds), skipping
    /// missing cells. Returns `(row, value)` pairs.
    pub fn numeric_column(&self, col: usize) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match &r[col] {
                Some(Value::Number(v)) => Some((i, *v)),
                _ => None,
            })
            .collect()
    }

    /// Keeps only the rows at `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> SurveyTable {
        SurveyTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Reads a table from RFC-4180 CSV with a header row matching the schema
    /// column names. Empty fields are missing.
    pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
        let names: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
        let got: Vec<&str> = headers.iter().collect();
        if got != names {
            return Err(DataError::ShapeMismatch(format!(
                "csv header {:?} does not match schema columns {:?}",
                got, names
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
            if rec.len() != schema.n_columns() {
                return Err(DataError::ShapeMismatch(format!(
                    "csv row {} has {} fields",
                    i + 1,
                    rec.len()
                )));
            }
            let mut row = Vec::with_capacity(rec.len());
            for (c, field) in rec.iter().enumerate() {
                if field.is_empty() {
                    row.push(None);
                    continue;
                }
                let cell = match &schema.columns()[c].kind {
                    ColumnKind::Categorical { .. } => Value::Label(field.to_string()),
                    _ => {
                        let v: f64 = field.parse().map_err(|_| DataError::BadCell {
                            row: i,
                            column: schema.columns()[c].name.clone(),
                            reason: format!("cannot parse `{field}` as a number"),
                        })?;
                        Value::Number(v)
                    }
                };
                row.push(Some(cell));
            }
            rows.push(row);
        }
        SurveyTable::new(schema.clone(), rows)
    }

    /// Writes the table as CSV (header + rows, empty field = missing).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let names: Vec<&str> = self.schema.columns().iter().map(|c| c.name.as_str()).collect();
        wtr.write_record(&names).map_err(|e| DataError::Csv(e.to_string()))?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|cell| match cell {
                    None => String::new(),
                    Some(Value::Number(v)) => format_number(*v),
                    Some(Value::Label(l)) => l.clone(),
                })
                .collect();
            wtr.write_record(&fields).map_err(|e| DataError::Csv(e.to_string()))?;
        }
        wtr.flush().map_err(|e| DataError::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Shortest round-trip formatting; integers print without a trailing `.0`.
pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let mut buf = ryu_format(v);
        if buf.ends_with(".0") {
            buf.truncate(buf.len() - 2);
        }
        buf
    }
}

fn ryu_format(v: f64) -> String {
    // `{}` on f64 is the shortest representation that round-trips.
    format!("{v}")
}

/// A logical consistency rule over raw numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub enum OutlierRule {
    /// `smaller <= larger` whenever both are observed (e.g. parity/gravidity).
    NotGreater { smaller: String, larger: String },
    /// `column >= min` whenever observed.
    AtLeast { column: String, min: f64 },
    /// `column <= max` whenever observed.
    AtMost { column: String, max: f64 },
}

/// A rule violation: which row broke which rule (index into the rule list).
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub rule: usize,
}

fn numeric_cell(table: &SurveyTable, row: usize, col: usize) -> Option<f64> {
    match table.cell(row, col) {
        Some(Value::Number(v)) => Some(*v),
        _ => None,
    }
}

/// Checks every row against every rule; returns all violations, mutating
/// nothing. Rules skip rows where a referenced cell is missing.
pub fn check_outliers(
    table: &SurveyTable,
    rules: &[OutlierRule],
) -> Result<Vec<Violation>, DataError> {
    let schema = table.schema();
    let resolve = |rule_idx: usize, name: &str| -> Result<usize, DataError> {
        let col = schema
            .column_index(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))?;
        match schema.columns()[col].kind {
            ColumnKind::Categorical { .. } => Err(DataError::RuleColumnKind {
                rule: rule_idx,
                column: name.to_string(),
            }),
            _ => Ok(col),
        }
    };
    let mut violations = Vec::new();
    for (ri, rule) in rules.iter().enumerate() {
        match rule {
            OutlierRule::NotGreater { smaller, larger } => {
                let (a, b) = (resolve(ri, smaller)?, resolve(ri, larger)?);
                for row in 0..table.n_rows() {
                    if let (Some(x), Some(y)) = (numeric_cell(table, row, a), numeric_cell(table, row, b)) {
                        if x > y {
                            violations.push(Violation { row, rule: ri });
                        }
                    }
                }
            }
            OutlierRule::AtLeast { column, min } => {
                let c = resolve(ri, column)?;
                for row in 0..table.n_rows() {
                    if let Some(x) = numeric_cell(table, row, c) {
                        if x < *min {
                            violations.push(Violation { row, rule: ri });
                        }
                    }
                }
            }
            OutlierRule::AtMost { column, max } => {
                let c = resolve(ri, column)?;
                for row in 0..table.n_rows() {
                    if let Some(x) = numeric_cell(table, row, c) {
                        if x > *max {
                            violations.push(Violation { row, rule: ri });
                        }
                    }
                }
            }
        }
    }
    violations.sort_by_key(|v| (v.row, v.rule));
    Ok(violations)
}

/// Consistency rules for the default schema.
pub fn default_outlier_rules() -> Vec<OutlierRule> {
    vec![
        OutlierRule::NotGreater { smaller: "parity".into(), larger: "gravidity".into() },
        OutlierRule::AtLeast { column: "age".into(), min: 0.0 },
    ]
}
