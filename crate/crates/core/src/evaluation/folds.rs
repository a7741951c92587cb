use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AspectEdge;
use crate::sampling::stream;

/// One train/test partition of the labeled pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: Vec<AspectEdge>,
    pub test: Vec<AspectEdge>,
}

/// Seeded cross-validation splits. The pairs are shuffled once; fold `i`
/// tests on a contiguous window of `round((1 - train_fraction) * n)` pairs
/// starting at `floor(i * n / num_folds)` (wrapping), so every pair is tested
/// at least once and each fold trains on the rest.
pub fn split_folds(
    pairs: &[AspectEdge],
    num_folds: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    if num_folds < 2 {
        return Err(Error::Config("need at least two folds".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config("train_fraction must lie strictly between 0 and 1".into()));
    }
    let n = pairs.len();
    if n < num_folds {
        return Err(Error::Config(format!(
            "{n} pairs cannot be split into {num_folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, 0));
    let window = (((1.0 - train_fraction) * n as f64).round() as usize)
        .max(n.div_ceil(num_folds))
        .min(n - 1);

    Ok((0..num_folds)
        .map(|fold| {
            let start = fold * n / num_folds;
            let mut in_test = vec![false; n];
            for j in 0..window {
                in_test[order[(start + j) % n]] = true;
            }
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (i, e) in pairs.iter().enumerate() {
                if in_test[i] {
                    test.push(*e);
                } else {
                    train.push(*e);
                }
            }
            FoldSplit { fold, train, test }
        })
        .collect())
}
