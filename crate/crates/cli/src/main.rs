//! Command-line front end: generate synthetic panels, run combination
//! experiments, and score base-model importance.

mod config;
mod csvio;
mod errors;
mod report;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stackcast::domain::align_panel;
use stackcast::importance;
use stackcast::pipeline::{run_experiment, ExperimentConfig};
use stackcast::synth::{gen_panel, gen_series, BaseBankSpec};

use config::SynthRequest;
use errors::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "stackcast",
    version,
    about = "Combine base time-series forecasts with trainable meta-learners"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file: experiment settings for `run`, the data spec for `synth`
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory holding panel_*.csv inputs
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the seed (for `synth` without a config file, and `run`)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the experiment grid (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Baseline settings the config file is applied on top of
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    profile: Profile,
    /// Also emit SVG bar charts (importance)
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Reduced grids sized for one machine
    Desk,
    /// The complete grids (128-node LSTM, 100 trees, 100 test points)
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic series and base-forecast panels as CSV
    Synth,
    /// Run the combination experiment over panel_*.csv files
    Run,
    /// Score base-model importance (relevance/redundancy and
    /// nearest-neighbour weights)
    Importance,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth => cmd_synth(cli),
        Command::Run => cmd_run(cli),
        Command::Importance => cmd_importance(cli),
    }
}

fn require_dir<'a>(arg: &'a Option<PathBuf>, name: &str) -> CliResult<&'a Path> {
    arg.as_deref()
        .ok_or_else(|| CliError::config(format!("--{name} <dir> is required")))
}

fn ensure_out_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Decorrelate the bank's noise streams from the series seed.
fn bank_seed(series_seed: u64) -> u64 {
    series_seed
        .wrapping_mul(0x2545_F491_4F6C_DD1D)
        .wrapping_add(0x5EED_0BA5_E0BA_5E11)
}

fn cmd_synth(cli: &Cli) -> CliResult<()> {
    let out = require_dir(&cli.out, "out")?;
    let request = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            config::parse_synth_spec(&text, &path.display().to_string())?
        }
        None => SynthRequest::default_with_seed(cli.seed.unwrap_or(1)),
    };
    ensure_out_dir(out)?;
    for (name, spec) in &request.series {
        let series = gen_series(spec).map_err(|e| CliError::config(e.to_string()))?;
        let bank = match &request.bank {
            Some(bank) => bank.clone(),
            None => BaseBankSpec::default_bank(spec.level, bank_seed(spec.seed)),
        };
        let panel = gen_panel(&series, &bank).map_err(|e| CliError::config(e.to_string()))?;
        let pair = align_panel(series, panel).map_err(|e| CliError::Internal(e.to_string()))?;
        csvio::write_series(&out.join(format!("series_{name}.csv")), &pair.series)?;
        csvio::write_panel(&out.join(format!("panel_{name}.csv")), &pair)?;
        println!(
            "wrote series_{name}.csv and panel_{name}.csv ({} rows, {} models)",
            pair.len(),
            pair.panel.n_models()
        );
    }
    Ok(())
}

fn experiment_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match cli.profile {
        Profile::Desk => ExperimentConfig::desk(0),
        Profile::Full => ExperimentConfig::full(0),
    };
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        config::apply_run_config(&text, &path.display().to_string(), &mut cfg)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(cfg)
}

fn cmd_run(cli: &Cli) -> CliResult<()> {
    let data_dir = require_dir(&cli.data, "data")?;
    let out = require_dir(&cli.out, "out")?;
    let cfg = experiment_config(cli)?;
    let data = csvio::load_panels(data_dir)?;
    ensure_out_dir(out)?;

    let run = || run_experiment(&data, &cfg);
    let result = match cli.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| CliError::Internal(e.to_string()))?;
            pool.install(run)
        }
        None => run(),
    }
    .map_err(|e| CliError::data(e.to_string()))?;

    report::write_all(out, &result, &cfg)?;
    for best in &result.best {
        println!(
            "{:<6} {:<16} mape={:.4}",
            best.learner.to_string(),
            result.cells[best.cell_index].variant_label(),
            best.pooled.mape
        );
    }
    println!(
        "reports written to {} ({} series, {} grid cells)",
        out.display(),
        result.series.len(),
        result.cells.len()
    );
    Ok(())
}

fn cmd_importance(cli: &Cli) -> CliResult<()> {
    let data_dir = require_dir(&cli.data, "data")?;
    let out = require_dir(&cli.out, "out")?;
    let panels = csvio::load_panels(data_dir)?;
    ensure_out_dir(out)?;
    for series in &panels {
        let targets = series.aligned.series.values();
        let mrmr = importance::mrmr_scores(&series.aligned.panel, targets)
            .map_err(|e| CliError::data(format!("{}: {e}", series.name)))?;
        let relief = importance::rrelieff_scores(
            &series.aligned.panel,
            targets,
            importance::RELIEF_NEIGHBOURS,
            None,
        )
        .map_err(|e| CliError::data(format!("{}: {e}", series.name)))?;
        let relief_of = |model: &str| -> CliResult<f64> {
            relief
                .iter()
                .find(|(name, _)| name == model)
                .map(|(_, w)| *w)
                .ok_or_else(|| CliError::Internal(format!("no weight for model {model}")))
        };

        let mut csv = String::from("model,mrmr,rrelieff\n");
        for (model, score) in &mrmr {
            csv.push_str(&format!("{model},{score},{}\n", relief_of(model)?));
        }
        let csv_path = out.join(format!("importance_{}.csv", series.name));
        fs::write(&csv_path, csv)
            .map_err(|e| CliError::data(format!("{}: {e}", csv_path.display())))?;

        if cli.svg {
            let chart = svg::bar_chart(&[
                svg::Panel {
                    title: "relevance minus redundancy (selection order)",
                    bars: mrmr.clone(),
                },
                svg::Panel {
                    title: "nearest-neighbour weights",
                    bars: mrmr
                        .iter()
                        .map(|(model, _)| Ok((model.clone(), relief_of(model)?)))
                        .collect::<CliResult<_>>()?,
                },
            ]);
            let svg_path = out.join(format!("importance_{}.svg", series.name));
            fs::write(&svg_path, chart)
                .map_err(|e| CliError::data(format!("{}: {e}", svg_path.display())))?;
        }
        println!("scored {} ({} models)", series.name, mrmr.len());
    }
    Ok(())
}
