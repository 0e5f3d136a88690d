//! Forecast evaluation: percentage-error metrics, the Diebold-Mariano test
//! of equal predictive accuracy, rank tallies across series, and counters
//! for forecasts that leave the interval spanned by the base models.

use statrs::function::erf::erfc;

use crate::domain::{z_interval, Error, Result};

/// Summary metrics over one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Mean absolute percentage error.
    pub mape: f64,
    /// Median absolute percentage error.
    pub mdape: f64,
    /// Mean squared error (in target units squared).
    pub mse: f64,
    /// Mean signed percentage error; negative means over-forecasting.
    pub mpe: f64,
    /// Sample standard deviation of the percentage errors.
    pub stdpe: f64,
    pub count: usize,
}

/// Outcome of a Diebold-Mariano comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// How often forecasts leave the base-model interval, and what happened
/// when they did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtrapolationCounts {
    /// Forecasts outside the interval of the base forecasts.
    pub n1: usize,
    /// Of those, cases where the target was outside on the same side.
    pub n2: usize,
    /// Of those, cases more accurate than the median combiner.
    pub n3: usize,
}

/// Signed percentage errors: 100 * (y - forecast) / y.
pub fn percentage_errors(targets: &[f64], forecasts: &[f64]) -> Result<Vec<f64>> {
    if targets.len() != forecasts.len() {
        return Err(Error::LengthMismatch {
            what: "forecasts",
            expected: targets.len(),
            actual: forecasts.len(),
        });
    }
    if let Some(pos) = targets.iter().position(|&y| y == 0.0) {
        return Err(Error::ZeroTarget { pos });
    }
    Ok(targets
        .iter()
        .zip(forecasts)
        .map(|(&y, &f)| 100.0 * (y - f) / y)
        .collect())
}

/// All five summary metrics in one pass.
pub fn summarize(targets: &[f64], forecasts: &[f64]) -> Result<MetricsReport> {
    let pe = percentage_errors(targets, forecasts)?;
    if pe.is_empty() {
        return Err(Error::Empty("metrics input"));
    }
    let count = pe.len();
    let nf = count as f64;
    let mut abs_pe: Vec<f64> = pe.iter().map(|e| e.abs()).collect();
    abs_pe.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mape = abs_pe.iter().sum::<f64>() / nf;
    let mdape = crate::learners::median_of_sorted(&abs_pe);
    let mse = targets
        .iter()
        .zip(forecasts)
        .map(|(&y, &f)| (y - f) * (y - f))
        .sum::<f64>()
        / nf;
    let mpe = pe.iter().sum::<f64>() / nf;
    let stdpe = if count < 2 {
        0.0
    } else {
        (pe.iter().map(|e| (e - mpe) * (e - mpe)).sum::<f64>() / (nf - 1.0)).sqrt()
    };
    Ok(MetricsReport {
        mape,
        mdape,
        mse,
        mpe,
        stdpe,
        count,
    })
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Diebold-Mariano test on two error series under squared-error loss.
///
/// The loss differential is d_t = e_a^2 - e_b^2; its long-run variance uses
/// rectangular-weight autocovariances up to lag `horizon - 1`. A negative
/// statistic means model a is the more accurate one. Two-sided p-value from
/// the standard normal; `significant` is evaluated at level `alpha`.
pub fn dm_test(errors_a: &[f64], errors_b: &[f64], horizon: usize, alpha: f64) -> Result<DmResult> {
    if errors_a.len() != errors_b.len() {
        return Err(Error::LengthMismatch {
            what: "error series",
            expected: errors_a.len(),
            actual: errors_b.len(),
        });
    }
    let n = errors_a.len();
    if n < 10 {
        return Err(Error::TooShort {
            required: 10,
            actual: n,
        });
    }
    let d: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(&a, &b)| a * a - b * b)
        .collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let mut variance = 0.0;
    for lag in 0..horizon.max(1) {
        let gamma: f64 = (lag..n)
            .map(|t| (d[t] - mean) * (d[t - lag] - mean))
            .sum::<f64>()
            / nf;
        variance += if lag == 0 { gamma } else { 2.0 * gamma };
    }
    let (statistic, p_value) = if variance <= 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        }
    } else {
        let stat = mean / (variance / nf).sqrt();
        (stat, 2.0 * phi(-stat.abs()))
    };
    Ok(DmResult {
        statistic,
        p_value,
        significant: p_value < alpha,
    })
}

/// Rank the models of each series by ascending MAPE and tally how often
/// each model lands on each rank. Ties share the lower rank (competition
/// ranking). `per_series_mape[s][m]` is the MAPE of model m on series s;
/// the result is indexed `[model][rank - 1]`.
pub fn rank_models(per_series_mape: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let Some(first) = per_series_mape.first() else {
        return Err(Error::Empty("ranking input"));
    };
    let n_models = first.len();
    if n_models < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: n_models,
        });
    }
    let mut tallies = vec![vec![0usize; n_models]; n_models];
    for row in per_series_mape {
        if row.len() != n_models {
            return Err(Error::LengthMismatch {
                what: "mape row",
                expected: n_models,
                actual: row.len(),
            });
        }
        for (m, &v) in row.iter().enumerate() {
            let rank = 1 + row.iter().filter(|&&o| o < v).count();
            tallies[m][rank - 1] += 1;
        }
    }
    Ok(tallies)
}

/// Count forecasts outside the base-forecast interval of their query row.
/// `reference_forecasts` are the median combiner's outputs on the same rows.
pub fn extrapolation_counts(
    meta_forecasts: &[f64],
    query_rows: &[Vec<f64>],
    targets: &[f64],
    reference_forecasts: &[f64],
) -> Result<ExtrapolationCounts> {
    let check = |what: &'static str, len: usize| {
        if len == meta_forecasts.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what,
                expected: meta_forecasts.len(),
                actual: len,
            })
        }
    };
    check("query rows", query_rows.len())?;
    check("targets", targets.len())?;
    check("reference forecasts", reference_forecasts.len())?;
    let mut counts = ExtrapolationCounts::default();
    for i in 0..meta_forecasts.len() {
        let (low, high) = z_interval(&query_rows[i])?;
        let f = meta_forecasts[i];
        let above = f > high;
        let below = f < low;
        if !(above || below) {
            continue;
        }
        counts.n1 += 1;
        let y = targets[i];
        if (above && y > high) || (below && y < low) {
            counts.n2 += 1;
        }
        if (f - y).abs() < (reference_forecasts[i] - y).abs() {
            counts.n3 += 1;
        }
    }
    Ok(counts)
}
