//! Training-index selectors: build the set of time indexes a combiner is
//! fitted on for a query at time t with horizon h.
//!
//! All selectors return strictly increasing 1-based indexes and never an
//! index later than t - h, so nothing at or after the forecasted hour can
//! reach a learner.

use crate::domain::{Error, Result, TrainingSet};

/// Squared Euclidean distance between two patterns of equal length.
pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Candidate positions ordered by (distance to query, position). Positions
/// index into `patterns`; with patterns stored in time order the tie-break
/// picks the earlier time index.
pub(crate) fn ranked_by_distance(query: &[f64], patterns: &[Vec<f64>]) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = patterns
        .iter()
        .enumerate()
        .map(|(pos, p)| (pos, sq_distance(query, p).sqrt()))
        .collect();
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    ranked
}

/// All available history: {1, ..., t - h}.
pub fn select_global(t: usize, h: usize) -> Result<Vec<usize>> {
    if t <= h {
        return Err(Error::EmptyWindow { t, h, c: 0, s: 0 });
    }
    Ok((1..=t - h).collect())
}

/// Time indexes of the k candidates nearest to the query pattern, ascending.
/// Asking for more neighbours than the pool holds returns the whole pool;
/// distance ties go to the earlier time index.
pub fn select_knn_local(query: &[f64], candidates: &TrainingSet, k: usize) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::EmptyPool);
    }
    let ranked = ranked_by_distance(query, candidates.patterns());
    let mut picked: Vec<usize> = ranked
        .iter()
        .take(k.min(candidates.len()))
        .map(|&(pos, _)| candidates.indices()[pos])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// The contiguous window of the last c points ending at t - h:
/// {t - h - c + 1, ..., t - h}.
pub fn select_recent_v1(t: usize, h: usize, c: usize) -> Result<Vec<usize>> {
    if t < h + c {
        return Err(Error::EmptyWindow { t, h, c, s: 0 });
    }
    Ok((t - h - c + 1..=t - h).collect())
}

/// The c points lagged by whole periods of s, all in the same phase of the
/// cycle as t: {t - c*s, t - (c-1)*s, ..., t - s}.
pub fn select_seasonal(t: usize, s: usize, c: usize) -> Result<Vec<usize>> {
    if t <= c * s {
        return Err(Error::EmptyWindow { t, h: 0, c, s });
    }
    Ok((1..=c).rev().map(|j| t - j * s).collect())
}
