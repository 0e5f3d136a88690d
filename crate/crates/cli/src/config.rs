//! Line-oriented configuration files: `key = value` pairs under
//! `[section]` headers, `#` comments, fail-closed (unknown sections or keys
//! are errors, so a manifest echo always describes the run completely).

use std::collections::BTreeMap;

use stackcast::pipeline::{ExperimentConfig, LstmVariant, SelectionMetric};
use stackcast::synth::{BaseBankSpec, BaseModelKind, BaseModelSpec, SynthSpec};
use stackcast::LearnerKind;

use crate::errors::{CliError, CliResult};

/// One parsed `key = value` with its source line for error messages.
#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Sections in file order; keys in file order within each section.
pub fn parse_sections(text: &str, what: &str) -> CliResult<Vec<(String, Vec<Entry>)>> {
    let mut sections: Vec<(String, Vec<Entry>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::config(format!("{what}:{line}: unterminated section header")))?
                .trim();
            if name.is_empty() {
                return Err(CliError::config(format!("{what}:{line}: empty section name")));
            }
            sections.push((name.to_string(), Vec::new()));
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::config(format!(
                "{what}:{line}: expected `key = value`, got {content:?}"
            )));
        };
        let Some((_, entries)) = sections.last_mut() else {
            return Err(CliError::config(format!(
                "{what}:{line}: key {key:?} appears before any [section] header"
            )));
        };
        let key = key.trim().to_string();
        if entries.iter().any(|e| e.key == key) {
            return Err(CliError::config(format!(
                "{what}:{line}: duplicate key {key:?}"
            )));
        }
        entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

fn parse_num<T: std::str::FromStr>(e: &Entry, what: &str) -> CliResult<T> {
    e.value.parse().map_err(|_| {
        CliError::config(format!(
            "{what}:{line}: key {key:?}: cannot parse {value:?}",
            line = e.line,
            key = e.key,
            value = e.value
        ))
    })
}

fn parse_list<T: std::str::FromStr>(e: &Entry, what: &str) -> CliResult<Vec<T>> {
    e.value
        .split(',')
        .map(|part| {
            part.trim().parse().map_err(|_| {
                CliError::config(format!(
                    "{what}:{line}: key {key:?}: cannot parse list item {part:?}",
                    line = e.line,
                    key = e.key,
                ))
            })
        })
        .collect()
}

fn parse_bool(e: &Entry, what: &str) -> CliResult<bool> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CliError::config(format!(
            "{what}:{line}: key {key:?}: expected true or false, got {other:?}",
            line = e.line,
            key = e.key,
        ))),
    }
}

fn parse_opt_index(e: &Entry, what: &str) -> CliResult<Option<usize>> {
    if e.value == "auto" {
        Ok(None)
    } else {
        parse_num::<usize>(e, what).map(Some)
    }
}

/// Apply a run-config file on top of `base` (usually a profile preset).
pub fn apply_run_config(text: &str, what: &str, base: &mut ExperimentConfig) -> CliResult<()> {
    let sections = parse_sections(text, what)?;
    for (section, entries) in sections {
        if section != "experiment" {
            return Err(CliError::config(format!(
                "{what}: unknown section [{section}] (only [experiment] is recognized)"
            )));
        }
        for e in &entries {
            match e.key.as_str() {
                "horizon" => base.horizon = parse_num(e, what)?,
                "test_points" => base.test_points = parse_num(e, what)?,
                "test_start" => base.test_start = parse_opt_index(e, what)?,
                "test_end" => base.test_end = parse_opt_index(e, what)?,
                "warmup_rows" => base.warmup_rows = parse_num(e, what)?,
                "k_grid" => base.k_grid = parse_list(e, what)?,
                "include_global" => base.include_global = parse_bool(e, what)?,
                "c_grid" => base.c_grid = parse_list(e, what)?,
                "b_grid" => base.b_grid = parse_list(e, what)?,
                "mlp_nodes" => base.mlp_nodes = parse_list(e, what)?,
                "mlp_epochs" => base.mlp_epochs = parse_num(e, what)?,
                "mlp_alpha" => base.mlp_alpha = parse_num(e, what)?,
                "rf_trees" => base.rf_trees = parse_num(e, what)?,
                "rf_min_leaf" => base.rf_min_leaf = parse_num(e, what)?,
                "lstm_nodes" => base.lstm_nodes = parse_num(e, what)?,
                "lstm_epochs" => base.lstm_epochs = parse_num(e, what)?,
                "lstm_variants" => {
                    base.lstm_variants = e
                        .value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| {
                            LstmVariant::parse(s.trim()).ok_or_else(|| {
                                CliError::config(format!(
                                    "{what}:{}: unknown LSTM variant {s:?} (v1, v2 or v3)",
                                    e.line
                                ))
                            })
                        })
                        .collect::<CliResult<_>>()?
                }
                "lstm_include_global" => base.lstm_include_global = parse_bool(e, what)?,
                "s1" => base.s1 = parse_num(e, what)?,
                "s2" => base.s2 = parse_num(e, what)?,
                "seed" => base.seed = parse_num(e, what)?,
                "learners" => {
                    base.learners = e
                        .value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| {
                            LearnerKind::parse(s.trim()).ok_or_else(|| {
                                CliError::config(format!(
                                    "{what}:{}: unknown learner {s:?}",
                                    e.line
                                ))
                            })
                        })
                        .collect::<CliResult<_>>()?
                }
                "selection_metric" => {
                    base.selection_metric =
                        SelectionMetric::parse(e.value.as_str()).ok_or_else(|| {
                            CliError::config(format!(
                                "{what}:{}: unknown selection metric {:?}",
                                e.line, e.value
                            ))
                        })?
                }
                "per_series_best" => base.per_series_best = parse_bool(e, what)?,
                "rolling_selection" => base.rolling_selection = parse_bool(e, what)?,
                "dm_alpha" => base.dm_alpha = parse_num(e, what)?,
                other => {
                    return Err(CliError::config(format!(
                        "{what}:{}: unknown key {other:?} in [experiment]",
                        e.line
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Echo the effective config in the same format the parser accepts.
pub fn render_run_config(cfg: &ExperimentConfig) -> String {
    let list = |items: &[String]| items.join(",");
    let opt = |v: Option<usize>| v.map_or("auto".to_string(), |x| x.to_string());
    let mut out = String::from("[experiment]\n");
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    push("horizon", cfg.horizon.to_string());
    push("test_points", cfg.test_points.to_string());
    push("test_start", opt(cfg.test_start));
    push("test_end", opt(cfg.test_end));
    push("warmup_rows", cfg.warmup_rows.to_string());
    push(
        "k_grid",
        list(&cfg.k_grid.iter().map(|k| k.to_string()).collect::<Vec<_>>()),
    );
    push("include_global", cfg.include_global.to_string());
    push(
        "c_grid",
        list(&cfg.c_grid.iter().map(|c| c.to_string()).collect::<Vec<_>>()),
    );
    push(
        "b_grid",
        list(&cfg.b_grid.iter().map(|b| b.to_string()).collect::<Vec<_>>()),
    );
    push(
        "mlp_nodes",
        list(&cfg.mlp_nodes.iter().map(|m| m.to_string()).collect::<Vec<_>>()),
    );
    push("mlp_epochs", cfg.mlp_epochs.to_string());
    push("mlp_alpha", cfg.mlp_alpha.to_string());
    push("rf_trees", cfg.rf_trees.to_string());
    push("rf_min_leaf", cfg.rf_min_leaf.to_string());
    push("lstm_nodes", cfg.lstm_nodes.to_string());
    push("lstm_epochs", cfg.lstm_epochs.to_string());
    push(
        "lstm_variants",
        list(
            &cfg.lstm_variants
                .iter()
                .map(|v| v.name().to_string())
                .collect::<Vec<_>>(),
        ),
    );
    push("lstm_include_global", cfg.lstm_include_global.to_string());
    push("s1", cfg.s1.to_string());
    push("s2", cfg.s2.to_string());
    push("seed", cfg.seed.to_string());
    push(
        "learners",
        list(
            &cfg.learners
                .iter()
                .map(|l| l.name().to_lowercase())
                .collect::<Vec<_>>(),
        ),
    );
    push("selection_metric", cfg.selection_metric.name().to_string());
    push("per_series_best", cfg.per_series_best.to_string());
    push("rolling_selection", cfg.rolling_selection.to_string());
    push("dm_alpha", cfg.dm_alpha.to_string());
    out
}

/// A parsed synthetic-data request: named series plus the base-model bank.
#[derive(Debug, Clone)]
pub struct SynthRequest {
    pub series: Vec<(String, SynthSpec)>,
    /// None: the default eight-model bank.
    pub bank: Option<BaseBankSpec>,
}

impl SynthRequest {
    pub fn default_with_seed(seed: u64) -> SynthRequest {
        SynthRequest {
            series: vec![(
                "a".to_string(),
                SynthSpec {
                    seed,
                    ..SynthSpec::default()
                },
            )],
            bank: None,
        }
    }
}

/// Parse a synth spec file: `[series.<name>]` sections with SynthSpec keys
/// and optional `[model.<name>]` sections overriding the default bank.
pub fn parse_synth_spec(text: &str, what: &str) -> CliResult<SynthRequest> {
    let sections = parse_sections(text, what)?;
    let mut series: Vec<(String, SynthSpec)> = Vec::new();
    let mut models: Vec<BaseModelSpec> = Vec::new();
    for (section, entries) in &sections {
        if let Some(name) = section.strip_prefix("series.") {
            if name.is_empty() {
                return Err(CliError::config(format!("{what}: empty series name")));
            }
            let mut spec = SynthSpec::default();
            for e in entries {
                match e.key.as_str() {
                    "length" => spec.length = parse_num(e, what)?,
                    "level" => spec.level = parse_num(e, what)?,
                    "daily_amp" => spec.daily_amp = parse_num(e, what)?,
                    "weekly_amp" => spec.weekly_amp = parse_num(e, what)?,
                    "yearly_amp" => spec.yearly_amp = parse_num(e, what)?,
                    "noise_sd" => spec.noise_sd = parse_num(e, what)?,
                    "seed" => spec.seed = parse_num(e, what)?,
                    other => {
                        return Err(CliError::config(format!(
                            "{what}:{}: unknown key {other:?} in [{section}]",
                            e.line
                        )))
                    }
                }
            }
            series.push((name.to_string(), spec));
        } else if let Some(name) = section.strip_prefix("model.") {
            let mut model = BaseModelSpec {
                name: name.to_string(),
                kind: BaseModelKind::NoisyOracle,
                bias: 0.0,
                noise_sd: 0.0,
                seed: 0,
            };
            let mut kind_seen = false;
            for e in entries {
                match e.key.as_str() {
                    "kind" => {
                        kind_seen = true;
                        model.kind = match e.value.as_str() {
                            "seasonal_naive_24" => BaseModelKind::SeasonalNaive24,
                            "seasonal_naive_168" => BaseModelKind::SeasonalNaive168,
                            "moving_average" => BaseModelKind::MovingAverage,
                            "noisy_oracle" => BaseModelKind::NoisyOracle,
                            other => {
                                return Err(CliError::config(format!(
                                    "{what}:{}: unknown base model kind {other:?}",
                                    e.line
                                )))
                            }
                        }
                    }
                    "bias" => model.bias = parse_num(e, what)?,
                    "noise_sd" => model.noise_sd = parse_num(e, what)?,
                    "seed" => model.seed = parse_num(e, what)?,
                    other => {
                        return Err(CliError::config(format!(
                            "{what}:{}: unknown key {other:?} in [{section}]",
                            e.line
                        )))
                    }
                }
            }
            if !kind_seen {
                return Err(CliError::config(format!(
                    "{what}: [{section}] is missing the `kind` key"
                )));
            }
            models.push(model);
        } else {
            return Err(CliError::config(format!(
                "{what}: unknown section [{section}] (expected [series.<name>] or [model.<name>])"
            )));
        }
    }
    if series.is_empty() {
        return Err(CliError::config(format!(
            "{what}: no [series.<name>] section found"
        )));
    }
    let mut names = BTreeMap::new();
    for (name, _) in &series {
        if names.insert(name.clone(), ()).is_some() {
            return Err(CliError::config(format!(
                "{what}: duplicate series name {name:?}"
            )));
        }
    }
    Ok(SynthRequest {
        series,
        bank: if models.is_empty() {
            None
        } else {
            Some(BaseBankSpec { models })
        },
    })
}
