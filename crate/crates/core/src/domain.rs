//! Domain types shared by every other module: the target series, the panel
//! of base forecasts, training sets and the selector configuration.
//!
//! Time indexing is 1-based throughout: the first observation of a series is
//! t = 1. File ingestion maps CSV rows to these indices.

use chrono::NaiveDateTime;
use thiserror::Error;

/// One hour, as a timestamp step.
pub const HOUR_SECS: i64 = 3600;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("length mismatch: {what} has {actual} rows, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {what} at row {row}")]
    NonFiniteValue { what: &'static str, row: usize },
    #[error("timestamps must increase in exact 1-hour steps (violated at row {row})")]
    NonHourlyTimestamps { row: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("empty query pattern")]
    EmptyQuery,
    #[error("selection window is empty for t={t}, h={h}, c={c}, s={s}")]
    EmptyWindow { t: usize, h: usize, c: usize, s: usize },
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training index {index} would look ahead of the query (t={t}, h={h})")]
    LookaheadLeakage { index: usize, t: usize, h: usize },
    #[error("target value at position {pos} is zero; percentage errors undefined")]
    ZeroTarget { pos: usize },
    #[error("need at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },
    #[error("range [{start}, {end}] cannot hold {count} test points")]
    RangeTooSmall {
        start: usize,
        end: usize,
        count: usize,
    },
    #[error("series too short: need more than {required} rows, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("series {series}, t={t}, {learner}: {source}")]
    Task {
        series: String,
        t: usize,
        learner: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the (series, test point, learner) that produced it.
    pub fn in_task(self, series: &str, t: usize, learner: &str) -> Error {
        Error::Task {
            series: series.to_string(),
            t,
            learner: learner.to_string(),
            source: Box::new(self),
        }
    }
}

/// An hourly target series: strictly increasing timestamps in exact 1-hour
/// steps and one finite value per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    timestamps: Vec<NaiveDateTime>,
    values: Vec<f64>,
}

impl SeriesFrame {
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::Empty("series"));
        }
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "series values",
                expected: timestamps.len(),
                actual: values.len(),
            });
        }
        for (row, pair) in timestamps.windows(2).enumerate() {
            if (pair[1] - pair[0]).num_seconds() != HOUR_SECS {
                return Err(Error::NonHourlyTimestamps { row: row + 1 });
            }
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                what: "series",
                row,
            });
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Target value at 1-based time index `t`.
    pub fn value_at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }
}

/// A T x n matrix of base forecasts with one named column per base model.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPanel {
    model_names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl ForecastPanel {
    pub fn new(model_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if model_names.is_empty() {
            return Err(Error::Empty("model names"));
        }
        for (i, name) in model_names.iter().enumerate() {
            if model_names[..i].contains(name) {
                return Err(Error::InvalidParameter {
                    name: "model_names",
                    reason: format!("duplicate model name {name:?}"),
                });
            }
        }
        let n = model_names.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::LengthMismatch {
                    what: "panel row",
                    expected: n,
                    actual: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { what: "panel", row });
            }
        }
        Ok(Self { model_names, rows })
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Base-forecast vector at 1-based time index `t`.
    pub fn row_at(&self, t: usize) -> &[f64] {
        &self.rows[t - 1]
    }
}

/// Which training indexes a variant feeds to its learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorKind {
    /// All history up to t - h.
    Global,
    /// The k patterns nearest to the query (Euclidean).
    KnnLocal,
    /// The last c points ending at t - h.
    RecentV1,
    /// Points in the same phase of the s1 cycle.
    SeasonalV2,
    /// Points in the same phase of the s2 cycle.
    SeasonalV3,
}

/// Full selector configuration; `k` applies to KnnLocal, `c` to the windowed
/// variants, `s1`/`s2` to the seasonal ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorSpec {
    pub kind: SelectorKind,
    pub k: usize,
    pub c: usize,
    pub s1: usize,
    pub s2: usize,
    pub h: usize,
}

impl SelectorSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |cond: bool, name: &'static str, reason: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: reason.to_string(),
                })
            }
        };
        check(self.k >= 1, "k", "neighbor count must be >= 1")?;
        check(self.c >= 1, "c", "window length must be >= 1")?;
        check(self.s1 >= 1, "s1", "seasonal period must be >= 1")?;
        check(
            self.s2 >= 1 && self.s2 % self.s1 == 0,
            "s2",
            "must be a positive multiple of s1",
        )?;
        check(self.h >= 1, "h", "horizon must be >= 1")
    }
}

/// The training set for one forecasting task: ordered time indexes, the
/// base-forecast pattern and the realized target at each index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    indices: Vec<usize>,
    patterns: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(indices: Vec<usize>, patterns: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if patterns.len() != indices.len() {
            return Err(Error::LengthMismatch {
                what: "training patterns",
                expected: indices.len(),
                actual: patterns.len(),
            });
        }
        if targets.len() != indices.len() {
            return Err(Error::LengthMismatch {
                what: "training targets",
                expected: indices.len(),
                actual: targets.len(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter {
                name: "indices",
                reason: "training indexes must be strictly increasing".to_string(),
            });
        }
        Ok(Self {
            indices,
            patterns,
            targets,
        })
    }

    /// Build the set for a query at time `t` with horizon `h`, rejecting any
    /// index that could leak information from t - h + 1 onwards.
    pub fn for_query(
        aligned: &AlignedPair,
        indices: Vec<usize>,
        t: usize,
        h: usize,
    ) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&tau| tau + h > t) {
            return Err(Error::LookaheadLeakage { index: bad, t, h });
        }
        let patterns = indices
            .iter()
            .map(|&tau| aligned.panel.row_at(tau).to_vec())
            .collect();
        let targets = indices
            .iter()
            .map(|&tau| aligned.series.value_at(tau))
            .collect();
        Self::new(indices, patterns, targets)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn patterns(&self) -> &[Vec<f64>] {
        &self.patterns
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Number of base models per pattern (0 for an empty set).
    pub fn n_features(&self) -> usize {
        self.patterns.first().map_or(0, Vec::len)
    }

    /// New set holding the rows at the given positions (kept in given order).
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        Self::new(
            positions.iter().map(|&p| self.indices[p]).collect(),
            positions.iter().map(|&p| self.patterns[p].clone()).collect(),
            positions.iter().map(|&p| self.targets[p]).collect(),
        )
    }
}

/// A validated (series, panel) pair of equal length.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    pub series: SeriesFrame,
    pub panel: ForecastPanel,
}

impl AlignedPair {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// Pair a target series with its forecast panel. Both carry their own
/// invariants from construction; this checks they describe the same rows.
pub fn align_panel(series: SeriesFrame, panel: ForecastPanel) -> Result<AlignedPair> {
    if series.len() != panel.len() {
        return Err(Error::LengthMismatch {
            what: "panel",
            expected: series.len(),
            actual: panel.len(),
        });
    }
    Ok(AlignedPair { series, panel })
}

/// The interval spanned by the base forecasts of one query pattern. A
/// combined forecast outside it extrapolates beyond every base model.
pub fn z_interval(query: &[f64]) -> Result<(f64, f64)> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for &v in query {
        low = low.min(v);
        high = high.max(v);
    }
    Ok((low, high))
}
