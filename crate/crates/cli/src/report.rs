//! Report emission for experiment runs: summary metrics for the winning
//! variants, per-series MAPE, pairwise accuracy-test wins, rank tallies,
//! extrapolation counters and the manifest echoing the effective config.

use std::fs;
use std::path::Path;

use stackcast::pipeline::{ExperimentConfig, RunResult};

use crate::config::render_run_config;
use crate::errors::{CliError, CliResult};

fn write(path: &Path, content: String) -> CliResult<()> {
    fs::write(path, content).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Numbers in reports use the shortest representation that parses back to
/// the same f64.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_all(out_dir: &Path, result: &RunResult, cfg: &ExperimentConfig) -> CliResult<()> {
    write(out_dir.join("metrics.csv").as_path(), metrics_csv(result, cfg))?;
    write(
        out_dir.join("per_series_mape.csv").as_path(),
        per_series_mape_csv(result),
    )?;
    write(out_dir.join("dm_matrix.csv").as_path(), dm_matrix_csv(result))?;
    write(out_dir.join("ranking.csv").as_path(), ranking_csv(result))?;
    write(
        out_dir.join("extrapolation.csv").as_path(),
        extrapolation_csv(result),
    )?;
    write(out_dir.join("manifest.txt").as_path(), manifest(result, cfg))
}

fn metrics_csv(result: &RunResult, cfg: &ExperimentConfig) -> String {
    let mut out = String::from("learner,variant,mape,mdape,mse,mpe,stdpe\n");
    for best in &result.best {
        let r = &best.pooled;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            best.learner,
            result.cells[best.cell_index].variant_label(),
            num(r.mape),
            num(r.mdape),
            num(r.mse),
            num(r.mpe),
            num(r.stdpe),
        ));
    }
    if let Some(rolling) = &result.rolling {
        for (best, r) in result.best.iter().zip(rolling) {
            out.push_str(&format!(
                "{},rolling,{},{},{},{},{}\n",
                best.learner,
                num(r.mape),
                num(r.mdape),
                num(r.mse),
                num(r.mpe),
                num(r.stdpe),
            ));
        }
    }
    let _ = cfg;
    out
}

fn per_series_mape_csv(result: &RunResult) -> String {
    let mut out = String::from("series");
    for best in &result.best {
        out.push(',');
        out.push_str(best.learner.name());
    }
    out.push('\n');
    for (s, so) in result.series.iter().enumerate() {
        out.push_str(&so.name);
        for value in &result.per_series_mape[s] {
            out.push(',');
            out.push_str(&num(*value));
        }
        out.push('\n');
    }
    out
}

fn dm_matrix_csv(result: &RunResult) -> String {
    let mut out = String::from("model");
    for best in &result.best {
        out.push(',');
        out.push_str(best.learner.name());
    }
    out.push('\n');
    for (a, best) in result.best.iter().enumerate() {
        out.push_str(best.learner.name());
        for b in 0..result.best.len() {
            out.push(',');
            out.push_str(&result.dm_wins[a][b].to_string());
        }
        out.push('\n');
    }
    out
}

fn ranking_csv(result: &RunResult) -> String {
    let ranks = result.rank_tallies.first().map_or(0, Vec::len);
    let mut out = String::from("model");
    for r in 1..=ranks {
        out.push_str(&format!(",rank{r}"));
    }
    out.push('\n');
    for (m, best) in result.best.iter().enumerate() {
        out.push_str(best.learner.name());
        for count in &result.rank_tallies[m] {
            out.push(',');
            out.push_str(&count.to_string());
        }
        out.push('\n');
    }
    out
}

fn extrapolation_csv(result: &RunResult) -> String {
    let mut out = String::from("count");
    for best in &result.best {
        out.push(',');
        out.push_str(best.learner.name());
    }
    out.push('\n');
    for (label, pick) in [
        ("n1", 0usize),
        ("n2", 1),
        ("n3", 2),
    ] {
        out.push_str(label);
        for counts in &result.extrapolation {
            let v = match pick {
                0 => counts.n1,
                1 => counts.n2,
                _ => counts.n3,
            };
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

fn manifest(result: &RunResult, cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!(
        "series = {}\n",
        result
            .series
            .iter()
            .map(|s| s.name.as_str())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.push_str(&format!("grid_cells = {}\n", result.cells.len()));
    out.push('\n');
    out.push_str(&render_run_config(cfg));
    out
}
