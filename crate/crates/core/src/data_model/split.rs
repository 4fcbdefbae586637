//! Deterministic 2:1:1 dataset partitioning.

use super::encode::EncodedMatrix;
use super::DataError;
use crate::seeding::{stream_rng, STREAM_SPLIT};
use rand::seq::SliceRandom;

/// Train/validation/test partitions of an encoded matrix.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: EncodedMatrix,
    pub validation: EncodedMatrix,
    pub test: EncodedMatrix,
    pub seed: u64,
}

impl SplitDataset {
    /// Observed-value mean of every encoded column, per partition
    /// `[train, validation, test]`. Callers can compare these and re-seed
    /// when the partitions drift apart.
    pub fn partition_means(&self) -> [Vec<f64>; 3] {
        let means = |m: &EncodedMatrix| {
            (0..m.width())
                .map(|j| {
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for i in 0..m.n_rows() {
                        if m.mask()[[i, j]] {
                            sum += m.values()[[i, j]];
                            count += 1;
                        }
                    }
                    if count == 0 {
                        f64::NAN
                    } else {
                        sum / count as f64
                    }
                })
                .collect::<Vec<f64>>()
        };
        [means(&self.train), means(&self.validation), means(&self.test)]
    }
}

/// Shuffles `0..n` by seed and partitions 2:1:1: train takes `ceil(n/2)`
/// rows, the remainder is halved with its odd row going to test.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, STREAM_SPLIT);
    order.shuffle(&mut rng);
    let n_train = n.div_ceil(2);
    let rem = n - n_train;
    let n_val = rem / 2;
    let train = order[..n_train].to_vec();
    let validation = order[n_train..n_train + n_val].to_vec();
    let test = order[n_train + n_val..].to_vec();
    (train, validation, test)
}

/// Splits an encoded matrix 2:1:1 deterministically by seed.
pub fn split(matrix: &EncodedMatrix, seed: u64) -> Result<SplitDataset, DataError> {
    if matrix.n_rows() < 8 {
        return Err(DataError::TooFewRows { need: 8, got: matrix.n_rows() });
    }
    let (tr, va, te) = split_indices(matrix.n_rows(), seed);
    Ok(SplitDataset {
        train: matrix.subset(&tr),
        validation: matrix.subset(&va),
        test: matrix.subset(&te),
        seed,
    })
}
