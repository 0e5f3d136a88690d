//! The combiners: simple mean/median baselines plus five trainable
//! meta-learners (linear regression, kernel-weighted kNN, a one-hidden-layer
//! perceptron, a random forest and an LSTM).
//!
//! Every fit is a pure function of (training set, hyperparameters, seed);
//! fitted models are immutable and give deterministic predictions.

use std::sync::Arc;

use crate::domain::{Error, Result, TrainingSet};

pub mod forest;
pub mod knn;
pub mod linear;
pub mod lstm;
pub mod mlp;

pub use forest::{Forest, RfParams, TreeNode};
pub use knn::KnnConfig;
pub use linear::LinearCoeffs;
pub use lstm::LstmModel;
pub use mlp::MlpModel;

/// Tags for the seven combiners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Mean,
    Median,
    Lr,
    Knn,
    Mlp,
    Rf,
    Lstm,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 7] = [
        LearnerKind::Mean,
        LearnerKind::Median,
        LearnerKind::Lr,
        LearnerKind::Knn,
        LearnerKind::Mlp,
        LearnerKind::Rf,
        LearnerKind::Lstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Mean => "Mean",
            LearnerKind::Median => "Median",
            LearnerKind::Lr => "LR",
            LearnerKind::Knn => "kNN",
            LearnerKind::Mlp => "MLP",
            LearnerKind::Rf => "RF",
            LearnerKind::Lstm => "LSTM",
        }
    }

    pub fn parse(s: &str) -> Option<LearnerKind> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Arithmetic mean of the base forecasts.
pub fn combine_mean(query: &[f64]) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    Ok(query.iter().sum::<f64>() / query.len() as f64)
}

/// Sample median of the base forecasts; even counts average the two central
/// order statistics.
pub fn combine_median(query: &[f64]) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut sorted = query.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(median_of_sorted(&sorted))
}

pub(crate) fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Per-feature standardization fitted on a training set. Zero-spread
/// features keep scale 1 so the transform stays defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

impl Standardizer {
    pub fn fit(patterns: &[Vec<f64>], targets: &[f64]) -> Standardizer {
        let n = patterns.first().map_or(0, Vec::len);
        let rows = patterns.len().max(1) as f64;
        let mut x_mean = vec![0.0; n];
        for p in patterns {
            for (m, &v) in x_mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        for m in &mut x_mean {
            *m /= rows;
        }
        let mut x_scale = vec![0.0; n];
        for p in patterns {
            for ((s, &m), &v) in x_scale.iter_mut().zip(&x_mean).zip(p) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut x_scale {
            *s = (*s / rows).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        let y_mean = targets.iter().sum::<f64>() / targets.len().max(1) as f64;
        let mut y_scale =
            (targets.iter().map(|&y| (y - y_mean) * (y - y_mean)).sum::<f64>() / rows).sqrt();
        if y_scale == 0.0 {
            y_scale = 1.0;
        }
        Standardizer {
            x_mean,
            x_scale,
            y_mean,
            y_scale,
        }
    }

    /// Identity transform for `n` features (used by raw-weight constructors).
    pub fn identity(n: usize) -> Standardizer {
        Standardizer {
            x_mean: vec![0.0; n],
            x_scale: vec![1.0; n],
            y_mean: 0.0,
            y_scale: 1.0,
        }
    }

    pub fn transform_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.x_mean)
            .zip(&self.x_scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    pub fn transform_y(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_scale
    }

    pub fn inverse_y(&self, z: f64) -> f64 {
        z * self.y_scale + self.y_mean
    }
}

/// A fitted combiner: which learner it is, its parameters and the query
/// index it was fitted for. Immutable; `predict` is deterministic.
#[derive(Debug, Clone)]
pub struct MetaModel {
    params: MetaParams,
    fitted_at: usize,
}

/// Learner-specific fitted parameters.
#[derive(Debug, Clone)]
pub enum MetaParams {
    Mean,
    Median,
    Linear(LinearCoeffs),
    Knn {
        config: KnnConfig,
        train: Arc<TrainingSet>,
    },
    Mlp(MlpModel),
    Forest(Forest),
    Lstm {
        model: LstmModel,
        /// Patterns replayed in time order to warm the states before the query.
        history: Arc<TrainingSet>,
    },
}

impl MetaModel {
    pub fn new(params: MetaParams, fitted_at: usize) -> MetaModel {
        MetaModel { params, fitted_at }
    }

    pub fn kind(&self) -> LearnerKind {
        match self.params {
            MetaParams::Mean => LearnerKind::Mean,
            MetaParams::Median => LearnerKind::Median,
            MetaParams::Linear(_) => LearnerKind::Lr,
            MetaParams::Knn { .. } => LearnerKind::Knn,
            MetaParams::Mlp(_) => LearnerKind::Mlp,
            MetaParams::Forest(_) => LearnerKind::Rf,
            MetaParams::Lstm { .. } => LearnerKind::Lstm,
        }
    }

    pub fn fitted_at(&self) -> usize {
        self.fitted_at
    }

    pub fn params(&self) -> &MetaParams {
        &self.params
    }

    pub fn predict(&self, query: &[f64]) -> Result<f64> {
        match &self.params {
            MetaParams::Mean => combine_mean(query),
            MetaParams::Median => combine_median(query),
            MetaParams::Linear(coeffs) => Ok(coeffs.predict(query)),
            MetaParams::Knn { config, train } => {
                knn::combine(train, query, config.k, config.b)
            }
            MetaParams::Mlp(model) => Ok(model.predict(query)),
            MetaParams::Forest(forest) => Ok(forest.predict(query)),
            MetaParams::Lstm { model, history } => {
                Ok(model.predict(history.patterns(), query))
            }
        }
    }
}
