//! Panel CSV ingestion and emission.
//!
//! Format: header `timestamp,y,<model1>,...`, ISO-8601 hourly timestamps,
//! one decimal value per cell with 17 significant digits (so every f64
//! round-trips exactly), UTF-8, LF line endings, no missing cells.

use std::fs;
use std::path::Path;

use chrono::NaiveDateTime;
use stackcast::domain::{align_panel, AlignedPair, ForecastPanel, SeriesFrame};
use stackcast::pipeline::SeriesData;

use crate::errors::{CliError, CliResult};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// 17 significant digits: exact f64 round-trip.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Write `panel_<name>.csv` (timestamp, target, one column per base model).
pub fn write_panel(path: &Path, pair: &AlignedPair) -> CliResult<()> {
    let mut out = String::from("timestamp,y");
    for name in pair.panel.model_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, ts) in pair.series.timestamps().iter().enumerate() {
        out.push_str(&format_timestamp(*ts));
        out.push(',');
        out.push_str(&format_value(pair.series.values()[i]));
        for v in &pair.panel.rows()[i] {
            out.push(',');
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Write `series_<name>.csv` (timestamp, target only).
pub fn write_series(path: &Path, series: &SeriesFrame) -> CliResult<()> {
    let mut out = String::from("timestamp,y\n");
    for (ts, v) in series.timestamps().iter().zip(series.values()) {
        out.push_str(&format_timestamp(*ts));
        out.push(',');
        out.push_str(&format_value(*v));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Read one panel CSV into an aligned (series, panel) pair.
pub fn read_panel(path: &Path) -> CliResult<AlignedPair> {
    let what = path.display().to_string();
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{what}: {e}")))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(CliError::data(format!("{what}: empty file")));
    };
    let mut cols = header.split(',');
    if cols.next() != Some("timestamp") || cols.next() != Some("y") {
        return Err(CliError::data(format!(
            "{what}:1: header must start with `timestamp,y`"
        )));
    }
    let model_names: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if model_names.is_empty() {
        return Err(CliError::data(format!(
            "{what}:1: no base-model columns after `timestamp,y`"
        )));
    }

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let ts_text = fields
            .next()
            .ok_or_else(|| CliError::data(format!("{what}:{lineno}: missing timestamp")))?;
        let ts = NaiveDateTime::parse_from_str(ts_text, TIMESTAMP_FORMAT)
            .map_err(|e| CliError::data(format!("{what}:{lineno}: bad timestamp {ts_text:?}: {e}")))?;
        let parse = |field: Option<&str>, col: &str| -> CliResult<f64> {
            let field = field.ok_or_else(|| {
                CliError::data(format!("{what}:{lineno}: missing value for column {col}"))
            })?;
            field.parse::<f64>().map_err(|_| {
                CliError::data(format!(
                    "{what}:{lineno}: cannot parse {field:?} in column {col}"
                ))
            })
        };
        let y = parse(fields.next(), "y")?;
        let mut row = Vec::with_capacity(model_names.len());
        for name in &model_names {
            row.push(parse(fields.next(), name)?);
        }
        if fields.next().is_some() {
            return Err(CliError::data(format!(
                "{what}:{lineno}: more cells than header columns"
            )));
        }
        timestamps.push(ts);
        values.push(y);
        rows.push(row);
    }

    let series = SeriesFrame::new(timestamps, values)
        .map_err(|e| CliError::data(format!("{what}: {e}")))?;
    let panel = ForecastPanel::new(model_names, rows)
        .map_err(|e| CliError::data(format!("{what}: {e}")))?;
    align_panel(series, panel).map_err(|e| CliError::data(format!("{what}: {e}")))
}

/// Load every `panel_*.csv` under `dir`, sorted by file name.
pub fn load_panels(dir: &Path) -> CliResult<Vec<SeriesData>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map_or(false, |n| n.starts_with("panel_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!(
            "{}: no panel_*.csv files found",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|path| {
            let name = path
                .file_stem()
                .and_then(|n| n.to_str())
                .unwrap_or("panel")
                .trim_start_matches("panel_")
                .to_string();
            Ok(SeriesData {
                name,
                aligned: read_panel(&path)?,
            })
        })
        .collect()
}
