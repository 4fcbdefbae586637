//! Survey schema, raw tables, numeric encoding, splits, synthetic data and
//! missingness injection.
//!
//! The raw side is a [`SurveyTable`]: rows of typed cells (numbers or labels,
//! possibly missing) conforming to a [`Schema`]. The numeric side is an
//! [`EncodedMatrix`]: categorical columns expanded to one-hot groups and every
//! column scaled into `[0, 1]`, with a boolean mask marking observed entries.
//! All downstream models operate on the encoded side; [`decode`] restores raw
//! semantics exactly.

mod encode;
mod missing;
mod schema;
mod split;
mod synth;
mod table;

pub use encode::{decode, encode, encode_with_norm, norm_params_for, EncodedMatrix};
pub use missing::{inject_missing, MissingnessMechanism};
pub use schema::{default_schema, Column, ColumnKind, Schema};
pub use split::{split, split_indices, SplitDataset};
pub use synth::{default_synth_spec, synthesize, CorrelationPair, Marginal, SynthSpec};
pub use table::{
    check_outliers, default_outlier_rules, Cell, OutlierRule, SurveyTable, Value, Violation,
};

use thiserror::Error;

/// Errors from schema handling, encoding, splitting and generation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DataError {
    #[error("column `{0}`: observed values are constant, cannot min-max scale")]
    ColumnConstant(String),
    #[error("column `{column}`: unknown label `{label}`")]
    UnknownLabel { column: String, label: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("bad correlation spec: {0}")]
    BadCorrelationSpec(String),
    #[error("MAR driver column `{0}` is also an injection target")]
    DriverIsTarget(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}`: invalid kind: {reason}")]
    BadColumnKind { column: String, reason: String },
    #[error("row {row}, column `{column}`: {reason}")]
    BadCell {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("outlier rule {rule} refers to non-numeric column `{column}`")]
    RuleColumnKind { rule: usize, column: String },
    #[error("schema file: {0}")]
    SchemaParse(String),
    #[error("csv: {0}")]
    Csv(String),
}
