//! Experiment configuration: flat `key = value` files controlling grid
//! sizes, Monte Carlo depth, seeding, and output placement.
//!
//! The format deliberately mirrors scenario files — `#` comments, blank
//! lines, one `key = value` per line, duplicates refused — so a user
//! editing one kind of file never has to context-switch. Every key has a
//! documented default; an empty file (or no `--config` flag at all) is a
//! complete, valid configuration.
//!
//! | key                         | default | meaning                                        |
//! |-----------------------------|---------|------------------------------------------------|
//! | `master_seed`               | `7`     | root of every random stream                    |
//! | `out_dir`                   | `out`   | directory for CSV artifacts                    |
//! | `mode`                      | `both`  | `analytic`, `montecarlo`, or `both`            |
//! | `mc_symbols`                | `2000`  | Monte Carlo symbols per verification point     |
//! | `mc_stride`                 | `10`    | verify every k-th grid point by Monte Carlo    |
//! | `attention_grid_points`     | `101`   | α₁ grid size over [0, 1]                       |
//! | `sumsquare_grid_points`     | `61`    | 𝒜 grid size (log-spaced)                       |
//! | `sumsquare_span_decades`    | `2`     | 𝒜 grid covers [𝒜★·10⁻ᵈ, 𝒜★·10⁺ᵈ]               |
//! | `power_grid_points`         | `11`    | transmit-power grid size                       |
//! | `power_min_dbm`             | `0`     | lower edge of the power grid                   |
//! | `power_max_dbm`             | `20`    | upper edge of the power grid                   |
//! | `random_alpha_draws`        | `100`   | draws behind each random-attention average     |
//! | `waveform_duration_us`      | `10`    | synthesized window per waveform run            |
//! | `waveform_sample_rate_msps` | `16`    | sample rate of the synthesized traces          |
//! | `plot_stub`                 | `true`  | also emit a generic `plot.py` next to the CSVs |

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Everything that can go wrong while reading an experiment config.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The file could not be read.
    #[error("cannot read experiment config `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// A line is not `key = value`, or a value fails to parse.
    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A key is not in the documented table.
    #[error("unknown config key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },
    /// A parsed config violates an invariant (bounds, ordering, counts).
    #[error("config validation failed: {msg}")]
    Validation { msg: String },
}

// ---------------------------------------------------------------------------
// RunMode
// ---------------------------------------------------------------------------

/// Which result columns an experiment fills in.
///
/// `Analytic` emits closed-form columns only, `MonteCarlo` emits simulated
/// columns only, and `Both` emits the two side by side so disagreement is
/// visible in a single file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Analytic,
    MonteCarlo,
    Both,
}

impl RunMode {
    /// True when analytic columns are requested.
    pub fn wants_analytic(self) -> bool {
        matches!(self, RunMode::Analytic | RunMode::Both)
    }

    /// True when Monte Carlo columns are requested.
    pub fn wants_monte_carlo(self) -> bool {
        matches!(self, RunMode::MonteCarlo | RunMode::Both)
    }

    /// Canonical spelling, as accepted by [`RunMode::from_str`].
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Analytic => "analytic",
            RunMode::MonteCarlo => "montecarlo",
            RunMode::Both => "both",
        }
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(RunMode::Analytic),
            "montecarlo" => Ok(RunMode::MonteCarlo),
            "both" => Ok(RunMode::Both),
            other => Err(format!(
                "mode must be `analytic`, `montecarlo`, or `both`, got `{other}`"
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

/// Validated experiment configuration (see module docs for the key table).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Root seed from which every payload/noise/grid stream is derived.
    pub master_seed: u64,
    /// Output directory for CSV artifacts; created on demand.
    pub out_dir: String,
    /// Which result columns to fill in.
    pub mode: RunMode,
    /// Monte Carlo symbols per verified grid point (≥ 1).
    pub mc_symbols: usize,
    /// Monte Carlo verification runs at grid indices divisible by this (≥ 1).
    pub mc_stride: usize,
    /// Attention sweep grid size over α₁ ∈ [0, 1] (≥ 2: both endpoints).
    pub attention_grid_points: usize,
    /// Sum-square sweep grid size (≥ 1; one point is degenerate but valid).
    pub sumsquare_grid_points: usize,
    /// Sum-square grid half-span in decades around the optimum (> 0).
    pub sumsquare_span_decades: f64,
    /// Power sweep grid size (≥ 1).
    pub power_grid_points: usize,
    /// Power grid lower edge, dBm.
    pub power_min_dbm: f64,
    /// Power grid upper edge, dBm (≥ the lower edge).
    pub power_max_dbm: f64,
    /// Attention draws behind each random-allocation average (≥ 1).
    pub random_alpha_draws: usize,
    /// Waveform experiment window, µs (> 0).
    pub waveform_duration_us: f64,
    /// Waveform experiment sample rate, MS/s (> 0).
    pub waveform_sample_rate_msps: f64,
    /// Whether to drop a generic plotting stub next to the CSV files.
    pub plot_stub: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 7,
            out_dir: "out".to_string(),
            mode: RunMode::Both,
            mc_symbols: 2000,
            mc_stride: 10,
            attention_grid_points: 101,
            sumsquare_grid_points: 61,
            sumsquare_span_decades: 2.0,
            power_grid_points: 11,
            power_min_dbm: 0.0,
            power_max_dbm: 20.0,
            random_alpha_draws: 100,
            waveform_duration_us: 10.0,
            waveform_sample_rate_msps: 16.0,
            plot_stub: true,
        }
    }
}

impl ExperimentConfig {
    /// Checks every invariant; returns the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Validation { msg });
        if self.mc_symbols == 0 {
            return fail("mc_symbols must be >= 1".into());
        }
        if self.mc_stride == 0 {
            return fail("mc_stride must be >= 1".into());
        }
        if self.attention_grid_points < 2 {
            return fail(format!(
                "attention_grid_points must be >= 2 to cover both endpoints of [0,1], got {}",
                self.attention_grid_points
            ));
        }
        if self.sumsquare_grid_points == 0 {
            return fail("sumsquare_grid_points must be >= 1".into());
        }
        if !(self.sumsquare_span_decades.is_finite() && self.sumsquare_span_decades > 0.0) {
            return fail(format!(
                "sumsquare_span_decades must be a positive finite decade count, got {}",
                self.sumsquare_span_decades
            ));
        }
        if self.power_grid_points == 0 {
            return fail("power_grid_points must be >= 1 (empty power grid)".into());
        }
        if !self.power_min_dbm.is_finite() || !self.power_max_dbm.is_finite() {
            return fail(format!(
                "power grid bounds must be finite, got [{}, {}] dBm",
                self.power_min_dbm, self.power_max_dbm
            ));
        }
        if self.power_min_dbm > self.power_max_dbm {
            return fail(format!(
                "power grid bounds must be ordered, got [{}, {}] dBm",
                self.power_min_dbm, self.power_max_dbm
            ));
        }
        if self.random_alpha_draws == 0 {
            return fail("random_alpha_draws must be >= 1".into());
        }
        if !(self.waveform_duration_us.is_finite() && self.waveform_duration_us > 0.0) {
            return fail(format!(
                "waveform_duration_us must be positive and finite, got {}",
                self.waveform_duration_us
            ));
        }
        if !(self.waveform_sample_rate_msps.is_finite() && self.waveform_sample_rate_msps > 0.0) {
            return fail(format!(
                "waveform_sample_rate_msps must be positive and finite, got {}",
                self.waveform_sample_rate_msps
            ));
        }
        Ok(())
    }

    /// Canonical text form: every key, sorted, one per line. Feeding the
    /// result back through [`config_from_str`] reproduces `self`.
    pub fn to_canonical_string(&self) -> String {
        let mut s = self.fingerprint_text();
        s.push_str("out_dir = ");
        s.push_str(&self.out_dir);
        s.push('\n');
        s.push_str("plot_stub = ");
        s.push_str(&self.plot_stub.to_string());
        s.push('\n');
        s
    }

    /// The canonical text of every key that influences computed values —
    /// the input to the config fingerprint in artifact headers. Placement
    /// keys (`out_dir`, `plot_stub`) are deliberately excluded: running the
    /// same experiment into a different directory must reproduce the same
    /// bytes, header included.
    pub fn fingerprint_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("attention_grid_points", self.attention_grid_points.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("mc_stride", self.mc_stride.to_string());
        kv("mc_symbols", self.mc_symbols.to_string());
        kv("mode", self.mode.as_str().to_string());
        kv("power_grid_points", self.power_grid_points.to_string());
        kv("power_max_dbm", format!("{:e}", self.power_max_dbm));
        kv("power_min_dbm", format!("{:e}", self.power_min_dbm));
        kv("random_alpha_draws", self.random_alpha_draws.to_string());
        kv("sumsquare_grid_points", self.sumsquare_grid_points.to_string());
        kv("sumsquare_span_decades", format!("{:e}", self.sumsquare_span_decades));
        kv("waveform_duration_us", format!("{:e}", self.waveform_duration_us));
        kv("waveform_sample_rate_msps", format!("{:e}", self.waveform_sample_rate_msps));
        s
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses config text (see module docs for the format and key table).
pub fn config_from_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or(ConfigError::Parse {
            line,
            msg: format!("expected `key = value`, got `{stripped}`"),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: "empty key or value".into(),
            });
        }
        if entries.insert(key.clone(), (line, value)).is_some() {
            return Err(ConfigError::Parse {
                line,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }

    let mut cfg = ExperimentConfig::default();
    for (key, (line, value)) in entries {
        let bad = |msg: String| ConfigError::Parse { line, msg };
        match key.as_str() {
            "master_seed" => {
                cfg.master_seed = value
                    .parse()
                    .map_err(|_| bad(format!("master_seed: `{value}` is not a u64")))?;
            }
            "out_dir" => cfg.out_dir = value,
            "mode" => cfg.mode = value.parse().map_err(bad)?,
            "mc_symbols" => {
                cfg.mc_symbols = value
                    .parse()
                    .map_err(|_| bad(format!("mc_symbols: `{value}` is not a count")))?;
            }
            "mc_stride" => {
                cfg.mc_stride = value
                    .parse()
                    .map_err(|_| bad(format!("mc_stride: `{value}` is not a count")))?;
            }
            "attention_grid_points" => {
                cfg.attention_grid_points = value.parse().map_err(|_| {
                    bad(format!("attention_grid_points: `{value}` is not a count"))
                })?;
            }
            "sumsquare_grid_points" => {
                cfg.sumsquare_grid_points = value.parse().map_err(|_| {
                    bad(format!("sumsquare_grid_points: `{value}` is not a count"))
                })?;
            }
            "sumsquare_span_decades" => {
                cfg.sumsquare_span_decades = value.parse().map_err(|_| {
                    bad(format!("sumsquare_span_decades: `{value}` is not a number"))
                })?;
            }
            "power_grid_points" => {
                cfg.power_grid_points = value
                    .parse()
                    .map_err(|_| bad(format!("power_grid_points: `{value}` is not a count")))?;
            }
            "power_min_dbm" => {
                cfg.power_min_dbm = value
                    .parse()
                    .map_err(|_| bad(format!("power_min_dbm: `{value}` is not a number")))?;
            }
            "power_max_dbm" => {
                cfg.power_max_dbm = value
                    .parse()
                    .map_err(|_| bad(format!("power_max_dbm: `{value}` is not a number")))?;
            }
            "random_alpha_draws" => {
                cfg.random_alpha_draws = value
                    .parse()
                    .map_err(|_| bad(format!("random_alpha_draws: `{value}` is not a count")))?;
            }
            "waveform_duration_us" => {
                cfg.waveform_duration_us = value
                    .parse()
                    .map_err(|_| bad(format!("waveform_duration_us: `{value}` is not a number")))?;
            }
            "waveform_sample_rate_msps" => {
                cfg.waveform_sample_rate_msps = value.parse().map_err(|_| {
                    bad(format!("waveform_sample_rate_msps: `{value}` is not a number"))
                })?;
            }
            "plot_stub" => {
                cfg.plot_stub = value
                    .parse()
                    .map_err(|_| bad(format!("plot_stub: `{value}` is not `true`/`false`")))?;
            }
            _ => return Err(ConfigError::UnknownKey { key, line }),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads and validates an experiment config from a file.
pub fn load_config(path: &str) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(Path::new(path)).map_err(|source| ConfigError::Io {
        path: path.to_string(),
        source,
    })?;
    config_from_str(&text)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
