//! Kernel-weighted k-nearest-neighbour combiner: the forecast is the
//! Gaussian-weighted average of the targets of the k training patterns
//! closest to the query.
//!
//! The bandwidth adapts to the data: sigma = b * median of the distances
//! between the query and *all* training patterns, not just the selected
//! neighbours.

use crate::domain::{Error, Result, TrainingSet};
use crate::learners::median_of_sorted;
use crate::selection::ranked_by_distance;

/// Hyperparameters of the kNN combiner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    pub b: f64,
}

/// sigma = b * median(d); if the median is zero fall back to the mean, and
/// to 1 if that is zero too, so the weight function stays defined.
pub fn gaussian_bandwidth(distances: &[f64], b: f64) -> f64 {
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, c| a.partial_cmp(c).unwrap());
    let med = median_of_sorted(&sorted);
    if med > 0.0 {
        return b * med;
    }
    let mean = distances.iter().sum::<f64>() / distances.len().max(1) as f64;
    if mean > 0.0 {
        b * mean
    } else {
        b
    }
}

/// Weighted-average forecast over the k nearest neighbours. `k` is clamped
/// to the pool size; distance ties pick the earlier time index.
pub fn combine(train: &TrainingSet, query: &[f64], k: usize, b: f64) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 || !(b > 0.0) {
        return Err(Error::InvalidParameter {
            name: "knn",
            reason: format!("need k >= 1 and b > 0, got k={k}, b={b}"),
        });
    }
    let ranked = ranked_by_distance(query, train.patterns());
    let sigma = gaussian_bandwidth(
        &ranked.iter().map(|&(_, d)| d).collect::<Vec<_>>(),
        b,
    );
    let neighbours = &ranked[..k.min(train.len())];
    // Weights are exp(-d^2/sigma^2); factoring out the largest one keeps the
    // ratio finite when every exponent underflows.
    let min_sq = neighbours[0].1 * neighbours[0].1;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(pos, d) in neighbours {
        let w = (-(d * d - min_sq) / (sigma * sigma)).exp();
        num += w * train.targets()[pos];
        den += w;
    }
    Ok(num / den)
}
