//! Missingness injection under the three classic mechanisms.

use super::encode::{EncodedMatrix, MISSING_PLACEHOLDER};
use super::schema::ColumnKind;
use super::DataError;
use crate::seeding::{stream_rng, STREAM_MASK};
use rand::Rng;

/// How cells go missing.
#[derive(Debug, Clone, PartialEq)]
pub enum MissingnessMechanism {
    /// Missing completely at random: every targeted cell drops with `rate`.
    Mcar { rate: f64 },
    /// Missing at random: the drop probability is a logistic function of an
    /// observed driver column, `sigmoid(logit(base_rate) + slope * (x - mean))`.
    Mar {
        driver_column: String,
        logistic_slope: f64,
        base_rate: f64,
    },
    /// Missing not at random: the drop probability depends on the cell's own
    /// value (self-masking logistic around `rate`). Included for taxonomy
    /// completeness; the imputation methods assume MAR.
    Mnar { rate: f64 },
}

fn validate_rate(rate: f64) -> Result<(), DataError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(DataError::BadCorrelationSpec(format!(
            "missingness rate {rate} outside [0, 1]"
        )));
    }
    Ok(())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const MNAR_SLOPE: f64 = 4.0;

/// Masks targeted raw columns per the mechanism. Returns a new matrix; the
/// input is untouched. A dropped raw column masks all of its encoded slots.
pub fn inject_missing(
    matrix: &EncodedMatrix,
    mechanism: &MissingnessMechanism,
    target_columns: &[String],
    seed: u64,
) -> Result<EncodedMatrix, DataError> {
    let schema = matrix.schema().clone();
    let mut targets = Vec::with_capacity(target_columns.len());
    for name in target_columns {
        let idx = schema
            .column_index(name)
            .ok_or_else(|| DataError::UnknownColumn(name.clone()))?;
        targets.push(idx);
    }

    let driver_slot = match mechanism {
        MissingnessMechanism::Mcar { rate } | MissingnessMechanism::Mnar { rate } => {
            validate_rate(*rate)?;
            None
        }
        MissingnessMechanism::Mar { driver_column, base_rate, .. } => {
            validate_rate(*base_rate)?;
            let idx = schema
                .column_index(driver_column)
                .ok_or_else(|| DataError::UnknownColumn(driver_column.clone()))?;
            if targets.contains(&idx) {
                return Err(DataError::DriverIsTarget(driver_column.clone()));
            }
            if matches!(schema.columns()[idx].kind, ColumnKind::Categorical { .. }) {
                return Err(DataError::BadColumnKind {
                    column: driver_column.clone(),
                    reason: "MAR driver must be a single-slot column".into(),
                });
            }
            Some(schema.slot_range(idx).start)
        }
    };

    // Observed mean of the driver column, for centering the logistic.
    let driver_mean = driver_slot.map(|slot| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..matrix.n_rows() {
            if matrix.mask()[[i, slot]] {
                sum += matrix.values()[[i, slot]];
                count += 1;
            }
        }
        if count == 0 {
            0.5
        } else {
            sum / count as f64
        }
    });

    let mut out = matrix.clone();
    let mut rng = stream_rng(seed, STREAM_MASK);
    for row in 0..matrix.n_rows() {
        for &col in &targets {
            let u: f64 = rng.gen();
            let p = match mechanism {
                MissingnessMechanism::Mcar { rate } => *rate,
                MissingnessMechanism::Mar { logistic_slope, base_rate, .. } => {
                    if *base_rate == 0.0 {
                        0.0
                    } else if *base_rate == 1.0 {
                        1.0
                    } else {
                        let slot = driver_slot.unwrap();
                        if matrix.mask()[[row, slot]] {
                            let x = matrix.values()[[row, slot]] - driver_mean.unwrap();
                            sigmoid(logit(*base_rate) + logistic_slope * x)
                        } else {
                            *base_rate
                        }
                    }
                }
                MissingnessMechanism::Mnar { rate } => {
                    if *rate == 0.0 {
                        0.0
                    } else if *rate == 1.0 {
                        1.0
                    } else {
                        let slot = schema.slot_range(col).start;
                        let x = matrix.values()[[row, slot]] - 0.5;
                        sigmoid(logit(*rate) + MNAR_SLOPE * x)
                    }
                }
            };
            if u < p {
                let slots = schema.slot_range(col);
                let mut values = out.row(row);
                let mut mask = out.row_mask(row);
                for j in slots {
                    values[j] = MISSING_PLACEHOLDER;
                    mask[j] = false;
                }
                out.set_row(row, &values, &mask);
            }
        }
    }
    Ok(out)
}
