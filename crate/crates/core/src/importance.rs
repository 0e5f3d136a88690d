//! Input-importance scores for the base models: a greedy
//! relevance-minus-redundancy ranking built on discretized mutual
//! information, and a nearest-neighbour attribute estimator for regression.

use crate::domain::{Error, ForecastPanel, Result};

/// Equal-frequency bins used by the mutual-information estimator.
pub const MI_BINS: usize = 10;

/// Default neighbour count for the nearest-neighbour estimator.
pub const RELIEF_NEIGHBOURS: usize = 10;

/// Bin assignments from equal-frequency (quantile) edges. Identical values
/// always share a bin; a constant column collapses to a single bin.
fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t = values.len();
    let mut edges: Vec<f64> = (1..bins).map(|j| sorted[j * t / bins]).collect();
    edges.dedup();
    values
        .iter()
        .map(|v| edges.partition_point(|e| e <= v))
        .collect()
}

/// Plug-in mutual information (nats) between two bin sequences.
fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let a_card = a.iter().max().copied().unwrap_or(0) + 1;
    let b_card = b.iter().max().copied().unwrap_or(0) + 1;
    let mut joint = vec![0usize; a_card * b_card];
    let mut ma = vec![0usize; a_card];
    let mut mb = vec![0usize; b_card];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * b_card + y] += 1;
        ma[x] += 1;
        mb[y] += 1;
    }
    let t = a.len() as f64;
    let mut mi = 0.0;
    for x in 0..a_card {
        for y in 0..b_card {
            let c = joint[x * b_card + y];
            if c > 0 {
                let p = c as f64 / t;
                mi += p * (p * t * t / (ma[x] as f64 * mb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

fn panel_columns(panel: &ForecastPanel) -> Vec<Vec<f64>> {
    (0..panel.n_models())
        .map(|j| panel.rows().iter().map(|r| r[j]).collect())
        .collect()
}

fn column_range(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Greedy forward selection maximizing relevance minus mean redundancy.
///
/// Relevance is the mutual information between a base model's forecasts and
/// the target; redundancy is the mean mutual information with the models
/// already selected, both estimated on equal-frequency bins. The returned
/// list is in selection order with the score each model had when it was
/// picked. Constant columns score 0 and come last.
pub fn mrmr_scores(panel: &ForecastPanel, targets: &[f64]) -> Result<Vec<(String, f64)>> {
    let t = panel.len();
    if targets.len() != t {
        return Err(Error::LengthMismatch {
            what: "targets",
            expected: t,
            actual: targets.len(),
        });
    }
    if t < 20 {
        return Err(Error::TooShort {
            required: 20,
            actual: t,
        });
    }
    let n = panel.n_models();
    if n < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: n,
        });
    }

    let columns = panel_columns(panel);
    let degenerate: Vec<bool> = columns.iter().map(|c| column_range(c) == 0.0).collect();
    let binned: Vec<Vec<usize>> = columns
        .iter()
        .map(|c| equal_frequency_bins(c, MI_BINS))
        .collect();
    let y_bins = equal_frequency_bins(targets, MI_BINS);
    let relevance: Vec<f64> = binned.iter().map(|b| mutual_information(b, &y_bins)).collect();

    let mut active: Vec<usize> = (0..n).filter(|&i| !degenerate[i]).collect();
    let mut redundancy_sum = vec![0.0; n];
    let mut picked: Vec<(usize, f64)> = Vec::with_capacity(n);
    while !active.is_empty() {
        let steps_done = picked.len() as f64;
        let (pos, &best, score) = active
            .iter()
            .enumerate()
            .map(|(pos, i)| {
                let score = if steps_done == 0.0 {
                    relevance[*i]
                } else {
                    relevance[*i] - redundancy_sum[*i] / steps_done
                };
                (pos, i, score)
            })
            .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(b.1.cmp(a.1)))
            .unwrap();
        picked.push((best, score));
        active.remove(pos);
        for &i in &active {
            redundancy_sum[i] += mutual_information(&binned[i], &binned[best]);
        }
    }
    for (i, _) in degenerate.iter().enumerate().filter(|(_, &d)| d) {
        picked.push((i, 0.0));
    }
    Ok(picked
        .into_iter()
        .map(|(i, s)| (panel.model_names()[i].clone(), s))
        .collect())
}

/// Nearest-neighbour attribute weights for regression.
///
/// For each sampled instance and each of its k nearest neighbours
/// (Euclidean distance on range-normalized features, uniform neighbour
/// weights) the accumulators track how often the target differs, how often
/// each attribute differs, and how often both do; the final weight rewards
/// attributes that change together with the target. Weights lie in [-1, 1];
/// a zero-range attribute gets 0. `m_samples` limits the estimate to that
/// many evenly spaced instances (None processes all, in index order).
/// Results are in panel column order.
pub fn rrelieff_scores(
    panel: &ForecastPanel,
    targets: &[f64],
    k: usize,
    m_samples: Option<usize>,
) -> Result<Vec<(String, f64)>> {
    let t = panel.len();
    if targets.len() != t {
        return Err(Error::LengthMismatch {
            what: "targets",
            expected: t,
            actual: targets.len(),
        });
    }
    if k == 0 || t <= k {
        return Err(Error::TooShort {
            required: k + 1,
            actual: t,
        });
    }
    let n = panel.n_models();
    let columns = panel_columns(panel);

    // range-normalize; zero-range features contribute nothing anywhere
    let normalized: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            let range = column_range(c);
            if range == 0.0 {
                vec![0.0; t]
            } else {
                c.iter().map(|&v| (v - lo) / range).collect()
            }
        })
        .collect();
    let y_lo = targets.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_range = column_range(targets);
    let y_norm: Vec<f64> = if y_range == 0.0 {
        vec![0.0; t]
    } else {
        targets.iter().map(|&v| (v - y_lo) / y_range).collect()
    };

    let sampled: Vec<usize> = match m_samples {
        None => (0..t).collect(),
        Some(m) => {
            if m == 0 || m > t {
                return Err(Error::InvalidParameter {
                    name: "m_samples",
                    reason: format!("must be in 1..={t}, got {m}"),
                });
            }
            if m == 1 {
                vec![0]
            } else {
                (0..m)
                    .map(|j| ((j as f64) * (t - 1) as f64 / (m - 1) as f64).round() as usize)
                    .collect()
            }
        }
    };

    let mut ndc = 0.0;
    let mut nda = vec![0.0; n];
    let mut ndcda = vec![0.0; n];
    let weight = 1.0 / k as f64;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(t - 1);
    for &r in &sampled {
        dist.clear();
        for other in 0..t {
            if other == r {
                continue;
            }
            let d2: f64 = normalized
                .iter()
                .map(|col| {
                    let d = col[r] - col[other];
                    d * d
                })
                .sum();
            dist.push((d2, other));
        }
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
        };
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
        }
        for &(_, neighbour) in dist.iter().take(k) {
            let dy = (y_norm[r] - y_norm[neighbour]).abs();
            ndc += dy * weight;
            for (a, col) in normalized.iter().enumerate() {
                let da = (col[r] - col[neighbour]).abs();
                nda[a] += da * weight;
                ndcda[a] += dy * da * weight;
            }
        }
    }

    let m = sampled.len() as f64;
    let weights: Vec<f64> = (0..n)
        .map(|a| {
            let hit = if ndc > 0.0 { ndcda[a] / ndc } else { 0.0 };
            let miss = if m - ndc > 0.0 {
                (nda[a] - ndcda[a]) / (m - ndc)
            } else {
                0.0
            };
            hit - miss
        })
        .collect();
    Ok(panel
        .model_names()
        .iter()
        .cloned()
        .zip(weights)
        .collect())
}
