//! Experiment orchestration: for every series, every test point and every
//! combiner variant in the hyperparameter grids, build the training set,
//! refit the combiner and forecast, then reduce everything to metrics,
//! best-variant choices, pairwise accuracy tests, rank tallies and
//! extrapolation counters.
//!
//! Every forecasting task is pure given its derived seed, so the task grid
//! runs on whatever rayon pool is installed and the result is identical at
//! any parallelism.

use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{AlignedPair, Error, Result, TrainingSet};
use crate::learners::{self, forest, knn, linear, lstm, mlp, LearnerKind};
use crate::metrics::{self, ExtrapolationCounts, MetricsReport};
use crate::selection;

/// Training pool for the non-recurrent learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolChoice {
    /// All available history.
    Global,
    /// The k training patterns nearest to the query.
    NearestK(usize),
}

impl std::fmt::Display for PoolChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PoolChoice::Global => f.write_str("global"),
            PoolChoice::NearestK(k) => write!(f, "k={k}"),
        }
    }
}

/// Training window for the LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LstmWindow {
    Global,
    /// Last c points.
    V1(usize),
    /// c points in the same phase of the daily cycle.
    V2(usize),
    /// c points in the same phase of the weekly cycle.
    V3(usize),
}

/// LSTM window families enabled in a config (c comes from the c grid).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LstmVariant {
    V1,
    V2,
    V3,
}

impl LstmVariant {
    pub fn parse(s: &str) -> Option<LstmVariant> {
        match s {
            "v1" => Some(LstmVariant::V1),
            "v2" => Some(LstmVariant::V2),
            "v3" => Some(LstmVariant::V3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LstmVariant::V1 => "v1",
            LstmVariant::V2 => "v2",
            LstmVariant::V3 => "v3",
        }
    }
}

/// One grid cell: a combiner plus its training-set variant and
/// hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearnerCell {
    Mean,
    Median,
    Lr(PoolChoice),
    Knn {
        /// None trains on all available points.
        k: Option<usize>,
        b: f64,
    },
    Mlp {
        pool: PoolChoice,
        nodes: usize,
    },
    Rf(PoolChoice),
    Lstm(LstmWindow),
}

impl LearnerCell {
    pub fn learner(&self) -> LearnerKind {
        match self {
            LearnerCell::Mean => LearnerKind::Mean,
            LearnerCell::Median => LearnerKind::Median,
            LearnerCell::Lr(_) => LearnerKind::Lr,
            LearnerCell::Knn { .. } => LearnerKind::Knn,
            LearnerCell::Mlp { .. } => LearnerKind::Mlp,
            LearnerCell::Rf(_) => LearnerKind::Rf,
            LearnerCell::Lstm(_) => LearnerKind::Lstm,
        }
    }

    pub fn variant_label(&self) -> String {
        match self {
            LearnerCell::Mean | LearnerCell::Median => "-".to_string(),
            LearnerCell::Lr(pool) | LearnerCell::Rf(pool) => pool.to_string(),
            LearnerCell::Knn { k: Some(k), b } => format!("k={k},b={b}"),
            LearnerCell::Knn { k: None, b } => format!("global,b={b}"),
            LearnerCell::Mlp { pool, nodes } => format!("{pool},nodes={nodes}"),
            LearnerCell::Lstm(LstmWindow::Global) => "global".to_string(),
            LearnerCell::Lstm(LstmWindow::V1(c)) => format!("v1,c={c}"),
            LearnerCell::Lstm(LstmWindow::V2(c)) => format!("v2,c={c}"),
            LearnerCell::Lstm(LstmWindow::V3(c)) => format!("v3,c={c}"),
        }
    }
}

/// Metric used to pick the best variant per learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    #[default]
    Mape,
    Mdape,
    Mse,
}

impl SelectionMetric {
    pub fn of(self, report: &MetricsReport) -> f64 {
        match self {
            SelectionMetric::Mape => report.mape,
            SelectionMetric::Mdape => report.mdape,
            SelectionMetric::Mse => report.mse,
        }
    }

    pub fn parse(s: &str) -> Option<SelectionMetric> {
        match s {
            "mape" => Some(SelectionMetric::Mape),
            "mdape" => Some(SelectionMetric::Mdape),
            "mse" => Some(SelectionMetric::Mse),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SelectionMetric::Mape => "mape",
            SelectionMetric::Mdape => "mdape",
            SelectionMetric::Mse => "mse",
        }
    }
}

/// Everything the experiment driver needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Forecast horizon in hours.
    pub horizon: usize,
    /// How many evenly spaced test points per series.
    pub test_points: usize,
    /// First admissible test index (1-based). None: second half of the series.
    pub test_start: Option<usize>,
    /// Last admissible test index. None: the series end.
    pub test_end: Option<usize>,
    /// Rows never used for training or testing (lag warm-up of the panel).
    pub warmup_rows: usize,
    /// Neighbour counts for the local training pools.
    pub k_grid: Vec<usize>,
    /// Whether the all-history pool is part of the grids.
    pub include_global: bool,
    /// Window / sequence lengths for the LSTM variants.
    pub c_grid: Vec<usize>,
    /// Bandwidth multipliers for the kNN combiner.
    pub b_grid: Vec<f64>,
    pub mlp_nodes: Vec<usize>,
    pub mlp_epochs: usize,
    pub mlp_alpha: f64,
    pub rf_trees: usize,
    pub rf_min_leaf: usize,
    pub lstm_nodes: usize,
    pub lstm_epochs: usize,
    pub lstm_variants: Vec<LstmVariant>,
    pub lstm_include_global: bool,
    /// Daily and weekly seasonal periods in hours.
    pub s1: usize,
    pub s2: usize,
    pub seed: u64,
    /// Which combiners to report on.
    pub learners: Vec<LearnerKind>,
    pub selection_metric: SelectionMetric,
    /// Choose best variants per series instead of pooled over all series
    /// for the per-series analyses.
    pub per_series_best: bool,
    /// Also report, per learner, a forecast stream that re-picks the best
    /// variant at each test point from the previous test points only.
    pub rolling_selection: bool,
    /// Significance level of the pairwise accuracy tests.
    pub dm_alpha: f64,
}

impl ExperimentConfig {
    /// Full-scale defaults: 100 test points, the complete grids, a
    /// 128-node LSTM and a 100-tree forest.
    pub fn full(seed: u64) -> ExperimentConfig {
        let mut k_grid: Vec<usize> = (1..=10).map(|i| i * 20).collect();
        k_grid.extend([250, 300]);
        ExperimentConfig {
            horizon: 1,
            test_points: 100,
            test_start: None,
            test_end: None,
            warmup_rows: crate::synth::WARMUP_ROWS,
            k_grid,
            include_global: true,
            c_grid: vec![24, 48, 72, 168, 504],
            b_grid: vec![0.03, 0.05, 0.07],
            mlp_nodes: vec![1, 3, 5],
            mlp_epochs: 100,
            mlp_alpha: 0.01,
            rf_trees: 100,
            rf_min_leaf: 1,
            lstm_nodes: 128,
            lstm_epochs: 200,
            lstm_variants: vec![LstmVariant::V1, LstmVariant::V2, LstmVariant::V3],
            lstm_include_global: true,
            s1: 24,
            s2: 168,
            seed,
            learners: LearnerKind::ALL.to_vec(),
            selection_metric: SelectionMetric::Mape,
            per_series_best: false,
            rolling_selection: false,
            dm_alpha: 0.05,
        }
    }

    /// Desk-scale defaults: 50 test points, reduced grids (k in {40, all},
    /// c in {24, 168}, b = 0.05, one hidden node), an 8-node LSTM and a
    /// 50-tree forest. Sized for a half-year series on one machine; the
    /// weekly-phase LSTM variant is left out because a half-year history
    /// holds at most 25 weekly lags, which the daily-phase variant already
    /// covers after clamping.
    pub fn desk(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            test_points: 50,
            k_grid: vec![40],
            c_grid: vec![24, 168],
            b_grid: vec![0.05],
            mlp_nodes: vec![1],
            rf_trees: 50,
            lstm_nodes: 8,
            lstm_variants: vec![LstmVariant::V1, LstmVariant::V2],
            lstm_include_global: false,
            ..ExperimentConfig::full(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.horizon == 0 {
            return bad("horizon", "must be >= 1".into());
        }
        if self.test_points == 0 {
            return bad("test_points", "must be >= 1".into());
        }
        if self.learners.is_empty() {
            return bad("learners", "need at least one learner".into());
        }
        for (i, l) in self.learners.iter().enumerate() {
            if self.learners[..i].contains(l) {
                return bad("learners", format!("duplicate learner {l}"));
            }
        }
        if self.k_grid.is_empty() && !self.include_global {
            return bad("k_grid", "grid empty and global pool disabled".into());
        }
        if self.k_grid.contains(&0) {
            return bad("k_grid", "neighbour counts must be >= 1".into());
        }
        if self.b_grid.is_empty() || self.b_grid.iter().any(|&b| !(b > 0.0)) {
            return bad("b_grid", "need at least one multiplier > 0".into());
        }
        if self.mlp_nodes.is_empty() || self.mlp_nodes.contains(&0) {
            return bad("mlp_nodes", "need node counts >= 1".into());
        }
        if self.lstm_variants.is_empty() && !self.lstm_include_global {
            if self.learners.contains(&LearnerKind::Lstm) {
                return bad("lstm_variants", "no LSTM variant enabled".into());
            }
        }
        if !self.lstm_variants.is_empty() && self.c_grid.is_empty() {
            return bad("c_grid", "LSTM variants enabled but the c grid is empty".into());
        }
        if self.c_grid.contains(&0) {
            return bad("c_grid", "window lengths must be >= 1".into());
        }
        if self.s1 == 0 || self.s2 == 0 || self.s2 % self.s1 != 0 {
            return bad("s2", "s1 >= 1 and s2 a positive multiple of s1".into());
        }
        if self.lstm_variants.contains(&LstmVariant::V2) && self.horizon > self.s1 {
            return bad("horizon", format!("v2 needs horizon <= s1 = {}", self.s1));
        }
        if self.lstm_variants.contains(&LstmVariant::V3) && self.horizon > self.s2 {
            return bad("horizon", format!("v3 needs horizon <= s2 = {}", self.s2));
        }
        if self.mlp_epochs == 0 || self.lstm_epochs == 0 {
            return bad("epochs", "training epochs must be >= 1".into());
        }
        if self.rf_trees == 0 || self.rf_min_leaf == 0 {
            return bad("rf", "tree count and min leaf size must be >= 1".into());
        }
        if self.lstm_nodes == 0 {
            return bad("lstm_nodes", "must be >= 1".into());
        }
        if !(self.dm_alpha > 0.0 && self.dm_alpha < 1.0) {
            return bad("dm_alpha", "must lie in (0, 1)".into());
        }
        if !(self.mlp_alpha >= 0.0) {
            return bad("mlp_alpha", "must be >= 0".into());
        }
        Ok(())
    }

    /// The grid cells evaluated per test point, in canonical order: Mean and
    /// Median first (always present; the median is the extrapolation
    /// reference), then per configured learner the local variants ascending
    /// followed by the global one. Ties in the best-variant scan resolve to
    /// the earliest cell, hence to smaller grid values.
    pub fn enumerate_cells(&self) -> Vec<LearnerCell> {
        let mut cells = vec![LearnerCell::Mean, LearnerCell::Median];
        let on = |kind: LearnerKind| self.learners.contains(&kind);
        let pools = |cells: &mut Vec<LearnerCell>, make: &dyn Fn(PoolChoice) -> Vec<LearnerCell>| {
            for &k in &self.k_grid {
                cells.extend(make(PoolChoice::NearestK(k)));
            }
            if self.include_global {
                cells.extend(make(PoolChoice::Global));
            }
        };
        if on(LearnerKind::Lr) {
            pools(&mut cells, &|p| vec![LearnerCell::Lr(p)]);
        }
        if on(LearnerKind::Knn) {
            for &k in &self.k_grid {
                for &b in &self.b_grid {
                    cells.push(LearnerCell::Knn { k: Some(k), b });
                }
            }
            if self.include_global {
                for &b in &self.b_grid {
                    cells.push(LearnerCell::Knn { k: None, b });
                }
            }
        }
        if on(LearnerKind::Mlp) {
            pools(&mut cells, &|p| {
                self.mlp_nodes
                    .iter()
                    .map(|&nodes| LearnerCell::Mlp { pool: p, nodes })
                    .collect()
            });
        }
        if on(LearnerKind::Rf) {
            pools(&mut cells, &|p| vec![LearnerCell::Rf(p)]);
        }
        if on(LearnerKind::Lstm) {
            for &variant in &self.lstm_variants {
                for &c in &self.c_grid {
                    cells.push(LearnerCell::Lstm(match variant {
                        LstmVariant::V1 => LstmWindow::V1(c),
                        LstmVariant::V2 => LstmWindow::V2(c),
                        LstmVariant::V3 => LstmWindow::V3(c),
                    }));
                }
            }
            if self.lstm_include_global {
                cells.push(LearnerCell::Lstm(LstmWindow::Global));
            }
        }
        cells
    }
}

/// One input series with its panel.
#[derive(Debug, Clone)]
pub struct SeriesData {
    pub name: String,
    pub aligned: AlignedPair,
}

/// Forecasts and metrics of one cell on one series.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub forecasts: Vec<f64>,
    pub report: MetricsReport,
}

/// All per-series results.
#[derive(Debug, Clone)]
pub struct SeriesOutcome {
    pub name: String,
    pub test_points: Vec<usize>,
    pub targets: Vec<f64>,
    pub query_rows: Vec<Vec<f64>>,
    /// Indexed like `RunResult::cells`.
    pub cells: Vec<CellOutcome>,
}

/// The cell chosen for one learner.
#[derive(Debug, Clone)]
pub struct BestChoice {
    pub learner: LearnerKind,
    pub cell_index: usize,
    pub pooled: MetricsReport,
}

/// Full experiment output.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub cells: Vec<LearnerCell>,
    pub series: Vec<SeriesOutcome>,
    /// Per cell, metrics pooled over every series and test point.
    pub pooled: Vec<MetricsReport>,
    /// Per reported learner, the winning cell (order follows config).
    pub best: Vec<BestChoice>,
    /// [series][reported learner]: MAPE of the chosen cell.
    pub per_series_mape: Vec<Vec<f64>>,
    /// [learner a][learner b]: series where a is significantly more accurate.
    pub dm_wins: Vec<Vec<usize>>,
    /// [learner][rank - 1]: how often the learner took that rank.
    pub rank_tallies: Vec<Vec<usize>>,
    /// Per reported learner, over all series and test points.
    pub extrapolation: Vec<ExtrapolationCounts>,
    /// Per reported learner when rolling selection is on: pooled metrics of
    /// the stream that re-picks the variant from past test points only.
    pub rolling: Option<Vec<MetricsReport>>,
}

/// Evenly spaced test indexes over [start, end], inclusive.
pub fn pick_test_points(start: usize, end: usize, count: usize) -> Result<Vec<usize>> {
    if count == 0 || end < start || end - start + 1 < count {
        return Err(Error::RangeTooSmall { start, end, count });
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let span = (end - start) as f64;
    Ok((0..count)
        .map(|j| start + (j as f64 * span / (count - 1) as f64).round() as usize)
        .collect())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-task seed: deterministic in (config seed, series, test point, cell)
/// and independent of scheduling.
fn task_seed(seed: u64, series_idx: usize, t: usize, cell_idx: usize) -> u64 {
    let mut s = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    s = splitmix64(s ^ series_idx as u64);
    s = splitmix64(s ^ t as u64);
    splitmix64(s ^ cell_idx as u64)
}

/// Training indexes for a cell, or None for the learners that use the query
/// row only. Window lengths clamp to the available post-warm-up history.
fn cell_indexes(
    cell: &LearnerCell,
    global: &TrainingSet,
    query: &[f64],
    t: usize,
    cfg: &ExperimentConfig,
) -> Option<Result<Vec<usize>>> {
    let h = cfg.horizon;
    let warmup = cfg.warmup_rows;
    let clamp_window = |c: usize, s: usize| -> Result<usize> {
        let available = (t.saturating_sub(warmup + 1)) / s;
        let c_eff = c.min(available);
        if c_eff == 0 {
            Err(Error::EmptyWindow { t, h, c, s })
        } else {
            Ok(c_eff)
        }
    };
    let pool_indexes = |pool: &PoolChoice| -> Result<Vec<usize>> {
        match pool {
            PoolChoice::Global => Ok(global.indices().to_vec()),
            PoolChoice::NearestK(k) => selection::select_knn_local(query, global, *k),
        }
    };
    match cell {
        LearnerCell::Mean | LearnerCell::Median | LearnerCell::Knn { .. } => None,
        LearnerCell::Lr(pool) | LearnerCell::Rf(pool) | LearnerCell::Mlp { pool, .. } => {
            Some(pool_indexes(pool))
        }
        LearnerCell::Lstm(window) => Some(match window {
            LstmWindow::Global => Ok(global.indices().to_vec()),
            LstmWindow::V1(c) => {
                clamp_window(*c, 1).and_then(|c_eff| selection::select_recent_v1(t, h, c_eff))
            }
            LstmWindow::V2(c) => {
                clamp_window(*c, cfg.s1).and_then(|c_eff| selection::select_seasonal(t, cfg.s1, c_eff))
            }
            LstmWindow::V3(c) => {
                clamp_window(*c, cfg.s2).and_then(|c_eff| selection::select_seasonal(t, cfg.s2, c_eff))
            }
        }),
    }
}

/// Fit one cell for the query at time t and forecast.
fn cell_forecast(
    cell: &LearnerCell,
    aligned: &AlignedPair,
    global: &Arc<TrainingSet>,
    query: &[f64],
    t: usize,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<f64> {
    let train = match cell_indexes(cell, global, query, t, cfg) {
        None => None,
        Some(indexes) => {
            let idx = indexes?;
            if idx == global.indices() {
                Some(GlobalOrLocal::Global)
            } else {
                Some(GlobalOrLocal::Local(TrainingSet::for_query(
                    aligned,
                    idx,
                    t,
                    cfg.horizon,
                )?))
            }
        }
    };
    let train_ref = match &train {
        None => None,
        Some(GlobalOrLocal::Global) => Some(global.as_ref()),
        Some(GlobalOrLocal::Local(set)) => Some(set),
    };
    match cell {
        LearnerCell::Mean => learners::combine_mean(query),
        LearnerCell::Median => learners::combine_median(query),
        LearnerCell::Lr(_) => Ok(linear::combine(train_ref.unwrap(), query)?.0),
        LearnerCell::Knn { k, b } => {
            let k = k.unwrap_or(global.len());
            knn::combine(global, query, k, *b)
        }
        LearnerCell::Mlp { nodes, .. } => {
            let model = mlp::fit(train_ref.unwrap(), *nodes, cfg.mlp_epochs, cfg.mlp_alpha, seed)?;
            Ok(model.predict(query))
        }
        LearnerCell::Rf(_) => {
            let train = train_ref.unwrap();
            let r = forest::default_features_per_split(train.n_features());
            let model = forest::fit(train, cfg.rf_trees, cfg.rf_min_leaf, r, seed)?;
            Ok(model.predict(query))
        }
        LearnerCell::Lstm(_) => {
            let train = train_ref.unwrap();
            let model = lstm::fit(train, cfg.lstm_nodes, cfg.lstm_epochs, seed)?;
            Ok(model.predict(train.patterns(), query))
        }
    }
}

enum GlobalOrLocal {
    Global,
    Local(TrainingSet),
}

fn series_test_points(data: &SeriesData, cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    let t_len = data.aligned.len();
    let start = cfg.test_start.unwrap_or(t_len / 2 + 1);
    let end = cfg.test_end.unwrap_or(t_len);
    if end > t_len {
        return Err(Error::InvalidParameter {
            name: "test_end",
            reason: format!("{end} exceeds series length {t_len}"),
        });
    }
    if start <= cfg.warmup_rows + cfg.horizon {
        return Err(Error::InvalidParameter {
            name: "test_start",
            reason: format!(
                "{start} leaves no training data after {} warm-up rows at horizon {}",
                cfg.warmup_rows, cfg.horizon
            ),
        });
    }
    pick_test_points(start, end, cfg.test_points)
}

/// Run the full experiment.
pub fn run_experiment(data: &[SeriesData], cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("series set"));
    }
    let cells = cfg.enumerate_cells();

    let mut all_points = Vec::with_capacity(data.len());
    for series in data {
        all_points.push(series_test_points(series, cfg)?);
    }

    // flat task grid: (series, test point) -> forecasts for every cell
    let tasks: Vec<(usize, usize)> = all_points
        .iter()
        .enumerate()
        .flat_map(|(s, pts)| pts.iter().map(move |&t| (s, t)))
        .collect();
    let task_forecasts: Vec<Result<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(s, t)| {
            let series = &data[s];
            let aligned = &series.aligned;
            let query = aligned.panel.row_at(t);
            let global_idx: Vec<usize> = selection::select_global(t, cfg.horizon)
                .map_err(|e| e.in_task(&series.name, t, "selection"))?
                .into_iter()
                .filter(|&tau| tau > cfg.warmup_rows)
                .collect();
            if global_idx.is_empty() {
                return Err(Error::EmptyWindow {
                    t,
                    h: cfg.horizon,
                    c: 0,
                    s: 0,
                }
                .in_task(&series.name, t, "selection"));
            }
            let global = Arc::new(
                TrainingSet::for_query(aligned, global_idx, t, cfg.horizon)
                    .map_err(|e| e.in_task(&series.name, t, "selection"))?,
            );
            cells
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    let seed = task_seed(cfg.seed, s, t, c);
                    cell_forecast(cell, aligned, &global, query, t, seed, cfg)
                        .map_err(|e| e.in_task(&series.name, t, cell.learner().name()))
                })
                .collect()
        })
        .collect();

    // reassemble per series in deterministic order
    let mut series_outcomes: Vec<SeriesOutcome> = Vec::with_capacity(data.len());
    let mut cursor = 0;
    for (s, series) in data.iter().enumerate() {
        let points = &all_points[s];
        let mut per_cell: Vec<Vec<f64>> = vec![Vec::with_capacity(points.len()); cells.len()];
        for _ in points {
            let forecasts = task_forecasts[cursor].as_ref().map_err(clone_error)?;
            for (c, &f) in forecasts.iter().enumerate() {
                per_cell[c].push(f);
            }
            cursor += 1;
        }
        let targets: Vec<f64> = points.iter().map(|&t| series.aligned.series.value_at(t)).collect();
        let query_rows: Vec<Vec<f64>> = points
            .iter()
            .map(|&t| series.aligned.panel.row_at(t).to_vec())
            .collect();
        let cell_outcomes = per_cell
            .into_iter()
            .map(|forecasts| {
                let report = metrics::summarize(&targets, &forecasts)?;
                Ok(CellOutcome { forecasts, report })
            })
            .collect::<Result<Vec<_>>>()?;
        series_outcomes.push(SeriesOutcome {
            name: series.name.clone(),
            test_points: points.clone(),
            targets,
            query_rows,
            cells: cell_outcomes,
        });
    }

    // pooled metrics per cell
    let pooled: Vec<MetricsReport> = (0..cells.len())
        .map(|c| {
            let mut targets = Vec::new();
            let mut forecasts = Vec::new();
            for so in &series_outcomes {
                targets.extend_from_slice(&so.targets);
                forecasts.extend_from_slice(&so.cells[c].forecasts);
            }
            metrics::summarize(&targets, &forecasts)
        })
        .collect::<Result<Vec<_>>>()?;

    let reported: Vec<LearnerKind> = LearnerKind::ALL
        .into_iter()
        .filter(|k| cfg.learners.contains(k))
        .collect();
    let best = best_variants(&cells, &pooled, &reported, cfg.selection_metric);

    // per-series cell choice: pooled winner, or per-series winner if asked
    let chosen_cell = |s: usize, b: &BestChoice| -> usize {
        if !cfg.per_series_best {
            return b.cell_index;
        }
        let so = &series_outcomes[s];
        let mut winner = b.cell_index;
        let mut score = f64::INFINITY;
        for (c, cell) in cells.iter().enumerate() {
            if cell.learner() != b.learner {
                continue;
            }
            let v = cfg.selection_metric.of(&so.cells[c].report);
            if v < score {
                score = v;
                winner = c;
            }
        }
        winner
    };

    let per_series_mape: Vec<Vec<f64>> = (0..data.len())
        .map(|s| {
            best.iter()
                .map(|b| series_outcomes[s].cells[chosen_cell(s, b)].report.mape)
                .collect()
        })
        .collect();

    // pairwise accuracy wins per series
    let n_best = best.len();
    let mut dm_wins = vec![vec![0usize; n_best]; n_best];
    for (s, so) in series_outcomes.iter().enumerate() {
        if so.targets.len() < 10 {
            continue;
        }
        let errors: Vec<Vec<f64>> = best
            .iter()
            .map(|b| {
                so.targets
                    .iter()
                    .zip(&so.cells[chosen_cell(s, b)].forecasts)
                    .map(|(&y, &f)| y - f)
                    .collect()
            })
            .collect();
        for a in 0..n_best {
            for b in 0..n_best {
                if a == b {
                    continue;
                }
                let dm = metrics::dm_test(&errors[a], &errors[b], cfg.horizon, cfg.dm_alpha)?;
                if dm.significant && dm.statistic < 0.0 {
                    dm_wins[a][b] += 1;
                }
            }
        }
    }

    let rank_tallies = if n_best >= 2 {
        metrics::rank_models(&per_series_mape)?
    } else {
        vec![vec![data.len()]]
    };

    // extrapolation counters against the median combiner
    let median_cell = cells
        .iter()
        .position(|c| matches!(c, LearnerCell::Median))
        .expect("median cell always present");
    let extrapolation = best
        .iter()
        .map(|b| {
            let mut counts = ExtrapolationCounts::default();
            for (s, so) in series_outcomes.iter().enumerate() {
                let c = metrics::extrapolation_counts(
                    &so.cells[chosen_cell(s, b)].forecasts,
                    &so.query_rows,
                    &so.targets,
                    &so.cells[median_cell].forecasts,
                )?;
                counts.n1 += c.n1;
                counts.n2 += c.n2;
                counts.n3 += c.n3;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;

    let rolling = if cfg.rolling_selection {
        Some(rolling_reports(&cells, &series_outcomes, &reported, cfg)?)
    } else {
        None
    };

    Ok(RunResult {
        cells,
        series: series_outcomes,
        pooled,
        best,
        per_series_mape,
        dm_wins,
        rank_tallies,
        extrapolation,
        rolling,
    })
}

fn clone_error(e: &Error) -> Error {
    Error::InvalidParameter {
        name: "task",
        reason: e.to_string(),
    }
}

/// Per reported learner, the grid cell minimizing the selection metric
/// pooled over all series. Ties resolve to the earliest cell in canonical
/// order, i.e. to smaller grid values.
pub fn best_variants(
    cells: &[LearnerCell],
    pooled: &[MetricsReport],
    reported: &[LearnerKind],
    metric: SelectionMetric,
) -> Vec<BestChoice> {
    reported
        .iter()
        .map(|&learner| {
            let mut winner = None;
            let mut score = f64::INFINITY;
            for (c, cell) in cells.iter().enumerate() {
                if cell.learner() != learner {
                    continue;
                }
                let v = metric.of(&pooled[c]);
                if winner.is_none() || v < score {
                    winner = Some(c);
                    score = v;
                }
            }
            let cell_index = winner.expect("every reported learner has at least one cell");
            BestChoice {
                learner,
                cell_index,
                pooled: pooled[cell_index],
            }
        })
        .collect()
}

/// For each learner, rebuild the forecast stream where the variant used at
/// each test point is the one with the lowest mean absolute percentage
/// error over the *previous* test points of that series (first point: the
/// first cell in canonical order), then pool the metrics over series.
fn rolling_reports(
    cells: &[LearnerCell],
    series_outcomes: &[SeriesOutcome],
    reported: &[LearnerKind],
    cfg: &ExperimentConfig,
) -> Result<Vec<MetricsReport>> {
    let _ = cfg;
    reported
        .iter()
        .map(|&learner| {
            let cell_ids: Vec<usize> = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.learner() == learner)
                .map(|(i, _)| i)
                .collect();
            let mut targets = Vec::new();
            let mut forecasts = Vec::new();
            for so in series_outcomes {
                let mut cum_abs_pe = vec![0.0; cell_ids.len()];
                for (j, (&t, &y)) in so.test_points.iter().zip(&so.targets).enumerate() {
                    let _ = t;
                    let pick = if j == 0 {
                        0
                    } else {
                        let mut best = 0;
                        for (i, &acc) in cum_abs_pe.iter().enumerate() {
                            if acc < cum_abs_pe[best] {
                                best = i;
                            }
                        }
                        best
                    };
                    forecasts.push(so.cells[cell_ids[pick]].forecasts[j]);
                    targets.push(y);
                    for (i, &c) in cell_ids.iter().enumerate() {
                        cum_abs_pe[i] += (100.0 * (y - so.cells[c].forecasts[j]) / y).abs();
                    }
                }
            }
            metrics::summarize(&targets, &forecasts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::align_panel;
    use crate::synth::{gen_panel, gen_series, BaseBankSpec, SynthSpec};

    fn tiny_data(seed: u64) -> SeriesData {
        let spec = SynthSpec {
            length: 504,
            seed,
            ..SynthSpec::default()
        };
        let series = gen_series(&spec).unwrap();
        let bank = BaseBankSpec::default_bank(spec.level, seed.wrapping_add(9));
        let panel = gen_panel(&series, &bank).unwrap();
        SeriesData {
            name: format!("s{seed}"),
            aligned: align_panel(series, panel).unwrap(),
        }
    }

    fn tiny_config(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            test_points: 4,
            test_start: Some(400),
            k_grid: vec![20],
            c_grid: vec![12],
            b_grid: vec![0.05],
            mlp_nodes: vec![1],
            mlp_epochs: 10,
            rf_trees: 5,
            lstm_nodes: 3,
            lstm_epochs: 10,
            lstm_variants: vec![LstmVariant::V1, LstmVariant::V2],
            ..ExperimentConfig::desk(seed)
        }
    }

    #[test]
    fn test_point_examples() {
        assert_eq!(pick_test_points(1, 5, 5).unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(pick_test_points(1, 101, 3).unwrap(), vec![1, 51, 101]);
        assert_eq!(pick_test_points(10, 10, 1).unwrap(), vec![10]);
        assert!(matches!(
            pick_test_points(1, 3, 5),
            Err(Error::RangeTooSmall { .. })
        ));
        // spacing >= 1 keeps the points strictly increasing
        let pts = pick_test_points(100, 399, 77).unwrap();
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mean_cell_reduces_to_row_mean() {
        let data = tiny_data(1);
        let cfg = ExperimentConfig {
            learners: vec![LearnerKind::Mean],
            test_points: 1,
            test_start: Some(450),
            ..tiny_config(1)
        };
        let result = run_experiment(std::slice::from_ref(&data), &cfg).unwrap();
        let t = result.series[0].test_points[0];
        let row = data.aligned.panel.row_at(t);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        let mean_cell = result
            .cells
            .iter()
            .position(|c| matches!(c, LearnerCell::Mean))
            .unwrap();
        assert_eq!(result.series[0].cells[mean_cell].forecasts[0], mean);
        assert_eq!(result.best.len(), 1);
        assert_eq!(result.best[0].learner, LearnerKind::Mean);
    }

    #[test]
    fn global_only_grid_gives_identical_training_indexes() {
        let data = tiny_data(2);
        let cfg = ExperimentConfig {
            k_grid: vec![],
            include_global: true,
            lstm_variants: vec![],
            lstm_include_global: true,
            ..tiny_config(2)
        };
        let t = 450;
        let aligned = &data.aligned;
        let global_idx: Vec<usize> = selection::select_global(t, cfg.horizon)
            .unwrap()
            .into_iter()
            .filter(|&tau| tau > cfg.warmup_rows)
            .collect();
        let global = TrainingSet::for_query(aligned, global_idx.clone(), t, cfg.horizon).unwrap();
        let query = aligned.panel.row_at(t);
        let mut seen = Vec::new();
        for cell in cfg.enumerate_cells() {
            if let Some(idx) = cell_indexes(&cell, &global, query, t, &cfg) {
                seen.push((cell.learner(), idx.unwrap()));
            }
        }
        assert!(seen.iter().any(|(k, _)| *k == LearnerKind::Lr));
        assert!(seen.iter().any(|(k, _)| *k == LearnerKind::Mlp));
        assert!(seen.iter().any(|(k, _)| *k == LearnerKind::Rf));
        assert!(seen.iter().any(|(k, _)| *k == LearnerKind::Lstm));
        for (_, idx) in &seen {
            assert_eq!(idx, &global_idx);
        }
    }

    #[test]
    fn deterministic_learners_ignore_the_seed() {
        let data = tiny_data(3);
        let cfg_a = tiny_config(100);
        let cfg_b = ExperimentConfig {
            seed: 200,
            ..tiny_config(100)
        };
        let ra = run_experiment(std::slice::from_ref(&data), &cfg_a).unwrap();
        let rb = run_experiment(std::slice::from_ref(&data), &cfg_b).unwrap();
        for (c, cell) in ra.cells.iter().enumerate() {
            let same = ra.series[0].cells[c].forecasts == rb.series[0].cells[c].forecasts;
            match cell.learner() {
                LearnerKind::Mean | LearnerKind::Median | LearnerKind::Lr | LearnerKind::Knn => {
                    assert!(same, "{cell:?} should not depend on the seed");
                }
                _ => {}
            }
        }
    }

    #[test]
    fn result_invariant_to_thread_count() {
        let data = vec![tiny_data(4)];
        let cfg = tiny_config(7);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| run_experiment(&data, &cfg)).unwrap()
        };
        let a = run_with(1);
        let b = run_with(3);
        for (ca, cb) in a.series[0].cells.iter().zip(&b.series[0].cells) {
            assert_eq!(ca.forecasts, cb.forecasts);
        }
    }

    #[test]
    fn no_training_index_reaches_the_query() {
        let data = tiny_data(5);
        let cfg = tiny_config(5);
        let t = 420;
        let global_idx: Vec<usize> = selection::select_global(t, cfg.horizon)
            .unwrap()
            .into_iter()
            .filter(|&tau| tau > cfg.warmup_rows)
            .collect();
        let global =
            TrainingSet::for_query(&data.aligned, global_idx, t, cfg.horizon).unwrap();
        let query = data.aligned.panel.row_at(t);
        for cell in cfg.enumerate_cells() {
            if let Some(idx) = cell_indexes(&cell, &global, query, t, &cfg) {
                let idx = idx.unwrap();
                assert!(
                    idx.iter().all(|&tau| tau + cfg.horizon <= t),
                    "{cell:?} leaked {idx:?}"
                );
                assert!(idx.iter().all(|&tau| tau > cfg.warmup_rows));
            }
        }
    }

    #[test]
    fn seasonal_windows_clamp_near_the_warmup() {
        let data = tiny_data(6);
        let cfg = tiny_config(6);
        // t barely past warm-up: only a few daily lags exist
        let t = 250;
        let global_idx: Vec<usize> = (cfg.warmup_rows + 1..t).collect();
        let global =
            TrainingSet::for_query(&data.aligned, global_idx, t, cfg.horizon).unwrap();
        let query = data.aligned.panel.row_at(t);
        let idx = cell_indexes(
            &LearnerCell::Lstm(LstmWindow::V2(168)),
            &global,
            query,
            t,
            &cfg,
        )
        .unwrap()
        .unwrap();
        assert_eq!(idx.len(), (t - cfg.warmup_rows - 1) / cfg.s1);
        assert!(idx.iter().all(|&tau| tau % cfg.s1 == t % cfg.s1));
    }

    #[test]
    fn best_variant_prefers_smaller_grid_on_tie() {
        let cells = vec![
            LearnerCell::Knn { k: Some(20), b: 0.05 },
            LearnerCell::Knn { k: Some(40), b: 0.05 },
        ];
        let report = |mape: f64| MetricsReport {
            mape,
            mdape: mape,
            mse: 0.0,
            mpe: 0.0,
            stdpe: 0.0,
            count: 1,
        };
        let best = best_variants(
            &cells,
            &[report(1.5), report(1.5)],
            &[LearnerKind::Knn],
            SelectionMetric::Mape,
        );
        assert_eq!(best[0].cell_index, 0);
        let best = best_variants(
            &cells,
            &[report(1.6), report(1.2)],
            &[LearnerKind::Knn],
            SelectionMetric::Mape,
        );
        assert_eq!(best[0].cell_index, 1);
    }

    #[test]
    #[ignore]
    fn timing_one_desk_seed() {
        let spec = SynthSpec {
            length: 26 * 168,
            seed: 1,
            ..SynthSpec::default()
        };
        let series = gen_series(&spec).unwrap();
        let bank = BaseBankSpec::default_bank(spec.level, 10);
        let panel = gen_panel(&series, &bank).unwrap();
        let data = vec![SeriesData {
            name: "timing".into(),
            aligned: align_panel(series, panel).unwrap(),
        }];
        let cfg = ExperimentConfig::desk(1);
        let start = std::time::Instant::now();
        let result = run_experiment(&data, &cfg).unwrap();
        println!("desk seed took {:?}", start.elapsed());
        for b in &result.best {
            println!(
                "{}: {} mape={:.4}",
                b.learner,
                result.cells[b.cell_index].variant_label(),
                b.pooled.mape
            );
        }
        for kind in LearnerKind::ALL {
            let solo = ExperimentConfig {
                learners: vec![kind],
                ..ExperimentConfig::desk(1)
            };
            let start = std::time::Instant::now();
            run_experiment(&data, &solo).unwrap();
            println!("{kind} alone: {:?}", start.elapsed());
        }
    }

    #[test]
    fn rolling_selection_reports_every_learner() {
        let data = vec![tiny_data(8)];
        let cfg = ExperimentConfig {
            rolling_selection: true,
            ..tiny_config(8)
        };
        let result = run_experiment(&data, &cfg).unwrap();
        let rolling = result.rolling.unwrap();
        assert_eq!(rolling.len(), result.best.len());
        for r in &rolling {
            assert!(r.mape.is_finite());
        }
    }
}
