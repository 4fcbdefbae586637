//! Hot-deck donor matching: statistics from similar complete records become
//! genetic-search bounds.
//!
//! Similarity between a holey record and a pool row is the mean squared
//! difference over the record's observed slots only, so the threshold
//! schedule does not depend on how many slots are observed. The acceptance
//! threshold starts small and doubles until at least `min_matches` donors
//! qualify; donor mean and standard deviation of each missing slot then give
//! the search box.

use crate::data_model::EncodedMatrix;
use crate::ga::SearchBounds;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HotDeckError {
    #[error("pool has {got} usable rows, need at least {need}")]
    PoolTooSmall { got: usize, need: usize },
    #[error("record and pool widths disagree: {got} vs {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("record has no observed fields")]
    NothingObserved,
    #[error("record has no missing fields")]
    NothingMissing,
}

/// How donor statistics become search bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundsMode {
    /// Bounds one standard deviation apart, centered on the donor mean
    /// (`mean ± sigma/2`). The default reading.
    SigmaApart,
    /// Bounds at `mean ± sigma` (two sigmas apart). The alternative reading,
    /// selectable for comparison.
    TwoSigmaApart,
}

/// Matching configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotDeckConfig {
    pub min_matches: usize,
    pub bounds_mode: BoundsMode,
    pub initial_threshold: f64,
}

impl Default for HotDeckConfig {
    fn default() -> Self {
        Self { min_matches: 6, bounds_mode: BoundsMode::SigmaApart, initial_threshold: 0.01 }
    }
}

/// Donor statistics for one missing slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub slot: usize,
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Matching outcome: donor rows, per-missing-slot statistics and the
/// threshold that finally admitted enough donors.
#[derive(Debug, Clone, PartialEq)]
pub struct HotDeckResult {
    pub match_indices: Vec<usize>,
    pub fields: Vec<FieldStats>,
    pub final_threshold: f64,
}

/// Mean squared difference over the record's observed slots.
fn similarity(values: &[f64], mask: &[bool], pool_row: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((v, m), p) in values.iter().zip(mask).zip(pool_row) {
        if *m {
            let d = v - p;
            sum += d * d;
            count += 1;
        }
    }
    sum / count as f64
}

fn bounds_for(mean: f64, std: f64, mode: BoundsMode) -> (f64, f64) {
    let half = match mode {
        BoundsMode::SigmaApart => std / 2.0,
        BoundsMode::TwoSigmaApart => std,
    };
    if half > 0.0 {
        ((mean - half).clamp(0.0, 1.0), (mean + half).clamp(0.0, 1.0))
    } else {
        // zero spread: widen slightly so the search box is not degenerate
        ((mean - 0.01).clamp(0.0, 1.0), (mean + 0.01).clamp(0.0, 1.0))
    }
}

/// Finds at least `min_matches` donors for a masked record by doubling the
/// similarity threshold until enough pool rows qualify. Pool rows must be
/// fully observed in the record's observed and missing slots; others are
/// skipped.
pub fn find_similar(
    values: &[f64],
    mask: &[bool],
    pool: &EncodedMatrix,
    cfg: &HotDeckConfig,
) -> Result<HotDeckResult, HotDeckError> {
    if values.len() != pool.width() || mask.len() != pool.width() {
        return Err(HotDeckError::WidthMismatch { got: values.len(), expected: pool.width() });
    }
    if mask.iter().all(|&m| !m) {
        return Err(HotDeckError::NothingObserved);
    }
    let missing_slots: Vec<usize> = (0..mask.len()).filter(|&j| !mask[j]).collect();
    if missing_slots.is_empty() {
        return Err(HotDeckError::NothingMissing);
    }

    // the record's observed and missing slots together cover every slot, so
    // usable donors are exactly the fully observed pool rows
    let usable: Vec<usize> =
        (0..pool.n_rows()).filter(|&i| pool.row_fully_observed(i)).collect();
    if usable.len() < cfg.min_matches {
        return Err(HotDeckError::PoolTooSmall { got: usable.len(), need: cfg.min_matches });
    }

    let distances: Vec<(usize, f64)> = usable
        .iter()
        .map(|&i| (i, similarity(values, mask, &pool.row(i))))
        .collect();

    let mut threshold = cfg.initial_threshold;
    let mut matches: Vec<usize>;
    loop {
        matches = distances
            .iter()
            .filter(|(_, d)| *d <= threshold)
            .map(|(i, _)| *i)
            .collect();
        if matches.len() >= cfg.min_matches {
            break;
        }
        threshold *= 2.0;
    }

    let fields = missing_slots
        .iter()
        .map(|&slot| {
            let vals: Vec<f64> = matches.iter().map(|&i| pool.values()[[i, slot]]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let std = var.max(0.0).sqrt();
            let (lo, hi) = bounds_for(mean, std, cfg.bounds_mode);
            FieldStats { slot, mean, std, lo, hi }
        })
        .collect();

    Ok(HotDeckResult { match_indices: matches, fields, final_threshold: threshold })
}

/// Search bounds over the missing slots, in slot order.
pub fn bounds_from_matches(result: &HotDeckResult) -> SearchBounds {
    SearchBounds::new(result.fields.iter().map(|f| (f.lo, f.hi)).collect())
        .expect("hot-deck results always carry at least one field")
}
