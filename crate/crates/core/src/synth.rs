//! Synthetic data: a triple-seasonal hourly target series and a bank of
//! simple base forecasters producing the panel a meta-learner combines.
//! Stands in for real base-model forecasts at desk scale; panels built here
//! use the same CSV layout the command-line tools ingest.

use chrono::{NaiveDate, NaiveDateTime};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{Error, ForecastPanel, Result, SeriesFrame};

/// Hours of daily / weekly / yearly seasonality.
pub const DAILY: usize = 24;
pub const WEEKLY: usize = 168;
pub const YEARLY: usize = 8760;

/// Panel rows before this index carry lag warm-up placeholders and are
/// excluded from training pools and test points.
pub const WARMUP_ROWS: usize = WEEKLY;

/// Parameters of the generated target series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub length: usize,
    pub level: f64,
    pub daily_amp: f64,
    pub weekly_amp: f64,
    pub yearly_amp: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            length: 26 * WEEKLY,
            level: 100.0,
            daily_amp: 10.0,
            weekly_amp: 5.0,
            yearly_amp: 3.0,
            noise_sd: 2.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 * WEEKLY {
            return Err(Error::SeriesTooShort {
                required: 2 * WEEKLY,
                actual: self.length,
            });
        }
        let nonneg = [
            ("daily_amp", self.daily_amp),
            ("weekly_amp", self.weekly_amp),
            ("yearly_amp", self.yearly_amp),
            ("noise_sd", self.noise_sd),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "synth",
                    reason: format!("{name} must be >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// One synthetic base forecaster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseModelKind {
    /// Repeats the value one day back.
    SeasonalNaive24,
    /// Repeats the value one week back.
    SeasonalNaive168,
    /// Mean of the previous 24 hours.
    MovingAverage,
    /// The target plus a fixed bias and fresh Gaussian noise.
    NoisyOracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseModelSpec {
    pub name: String,
    pub kind: BaseModelKind,
    pub bias: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

/// The bank of base forecasters producing the panel columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseBankSpec {
    pub models: Vec<BaseModelSpec>,
}

impl BaseBankSpec {
    /// Eight models: two seasonal naives, one moving average and five noisy
    /// oracles with biases of -3/-1/0/+1/+3 % of the level and noise
    /// standard deviations of 1..5 % of the level.
    pub fn default_bank(level: f64, seed: u64) -> BaseBankSpec {
        let mut models = vec![
            BaseModelSpec {
                name: "snaive24".into(),
                kind: BaseModelKind::SeasonalNaive24,
                bias: 0.0,
                noise_sd: 0.0,
                seed,
            },
            BaseModelSpec {
                name: "snaive168".into(),
                kind: BaseModelKind::SeasonalNaive168,
                bias: 0.0,
                noise_sd: 0.0,
                seed,
            },
            BaseModelSpec {
                name: "ma24".into(),
                kind: BaseModelKind::MovingAverage,
                bias: 0.0,
                noise_sd: 0.0,
                seed,
            },
        ];
        let biases = [-3.0, -1.0, 0.0, 1.0, 3.0];
        for (i, bias_pct) in biases.into_iter().enumerate() {
            models.push(BaseModelSpec {
                name: format!("oracle{}", i + 1),
                kind: BaseModelKind::NoisyOracle,
                bias: bias_pct / 100.0 * level,
                noise_sd: (i + 1) as f64 / 100.0 * level,
                seed: seed.wrapping_add(i as u64 + 1),
            });
        }
        BaseBankSpec { models }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "bank",
                reason: format!("need at least 2 base models, got {}", self.models.len()),
            });
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::InvalidParameter {
                    name: "bank",
                    reason: format!("duplicate model name {:?}", m.name),
                });
            }
        }
        Ok(())
    }
}

/// First timestamp of every generated series.
pub fn base_timestamp() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2018, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

/// Generate the target series: level plus three sinusoidal seasonal
/// components plus Gaussian noise, floored at 1 % of the level.
pub fn gen_series(spec: &SynthSpec) -> Result<SeriesFrame> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise_sd.max(f64::MIN_POSITIVE)).unwrap();
    let tau = std::f64::consts::TAU;
    let floor = 0.01 * spec.level;
    // phases computed mod the period so the components are exactly periodic
    let wave = |t: usize, period: usize| (tau * (t % period) as f64 / period as f64).sin();
    let values: Vec<f64> = (1..=spec.length)
        .map(|t| {
            let noise = if spec.noise_sd > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            let y = spec.level
                + spec.daily_amp * wave(t, DAILY)
                + spec.weekly_amp * wave(t, WEEKLY)
                + spec.yearly_amp * wave(t, YEARLY)
                + noise;
            y.max(floor)
        })
        .collect();
    let base = base_timestamp();
    let timestamps = (0..spec.length)
        .map(|i| base + chrono::Duration::hours(i as i64))
        .collect();
    SeriesFrame::new(timestamps, values)
}

/// Run every bank model over the series. Rows within the longest lag (the
/// first `WARMUP_ROWS`) fall back to the target value itself; experiments
/// must exclude them.
pub fn gen_panel(series: &SeriesFrame, bank: &BaseBankSpec) -> Result<ForecastPanel> {
    bank.validate()?;
    if series.len() <= WEEKLY {
        return Err(Error::SeriesTooShort {
            required: WEEKLY + 1,
            actual: series.len(),
        });
    }
    let y = series.values();
    let t_len = y.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(bank.models.len());
    for model in &bank.models {
        let column = match model.kind {
            BaseModelKind::SeasonalNaive24 => lagged(y, DAILY),
            BaseModelKind::SeasonalNaive168 => lagged(y, WEEKLY),
            BaseModelKind::MovingAverage => {
                (0..t_len)
                    .map(|i| {
                        if i >= DAILY {
                            y[i - DAILY..i].iter().sum::<f64>() / DAILY as f64
                        } else {
                            y[i]
                        }
                    })
                    .collect()
            }
            BaseModelKind::NoisyOracle => {
                let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
                let normal =
                    Normal::new(0.0, model.noise_sd.max(f64::MIN_POSITIVE)).unwrap();
                y.iter()
                    .map(|&v| {
                        let noise = if model.noise_sd > 0.0 {
                            normal.sample(&mut rng)
                        } else {
                            0.0
                        };
                        v + model.bias + noise
                    })
                    .collect()
            }
        };
        columns.push(column);
    }
    let rows: Vec<Vec<f64>> = (0..t_len)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    ForecastPanel::new(bank.models.iter().map(|m| m.name.clone()).collect(), rows)
}

fn lagged(y: &[f64], lag: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| if i >= lag { y[i - lag] } else { y[i] })
        .collect()
}
