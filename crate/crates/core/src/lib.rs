//! Combining base time-series forecasts through meta-learning.
//!
//! A panel of base-model forecasts is treated as the input pattern for a
//! second-stage regressor (the meta-learner) that maps the n base forecasts
//! for hour t to one combined forecast. The crate provides:
//!
//! - domain types for hourly series, forecast panels and training sets,
//! - training-set selectors (global history, nearest patterns, recent
//!   window, seasonal-phase lags),
//! - seven combiners: mean, median, linear regression, kernel-weighted
//!   k-nearest neighbours, a single-hidden-layer perceptron, a random
//!   forest and an LSTM,
//! - a synthetic data generator standing in for a bank of real base models,
//! - evaluation machinery (percentage-error metrics, Diebold-Mariano tests,
//!   rankings, extrapolation counters, input-importance scores),
//! - an experiment driver that retrains every combiner variant at every
//!   test point over configurable hyperparameter grids.

pub mod domain;
pub mod importance;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod selection;
pub mod synth;

pub use domain::{
    align_panel, z_interval, AlignedPair, Error, ForecastPanel, Result, SelectorKind,
    SelectorSpec, SeriesFrame, TrainingSet,
};
pub use learners::{LearnerKind, MetaModel, MetaParams};
pub use metrics::{DmResult, ExtrapolationCounts, MetricsReport};
pub use pipeline::{ExperimentConfig, LearnerCell, RunResult};
pub use synth::{BaseBankSpec, BaseModelKind, SynthSpec};
