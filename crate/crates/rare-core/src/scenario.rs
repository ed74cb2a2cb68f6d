//! Scenario files: laboratory parameters, RF band plans, derived constants.
//!
//! A scenario is a flat `key = value` text file. Units are spelled out in
//! the key names (`omega_p_rabi_mhz_over_2pi`, `cell_length_cm`, ...)
//! because laboratory figures are universally quoted as 2π×(MHz); storing
//! them in quoted units avoids transcription errors. Structs keep the
//! file-unit values verbatim and expose SI accessors, so serializing and
//! reloading a scenario reproduces every derived constant bit for bit.
//!
//! Every key has a documented default (the cesium dual-band laboratory
//! setup); per-band keys have defaults only for the two-band layout, and
//! must be given explicitly for any other band count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::constants::{C_LIGHT, EPS0, HBAR, QA0, TWO_PI};
use crate::optimizer::optimal_sum_square;

/// Environment variable naming a directory against which relative scenario
/// paths are resolved (takes precedence over the working directory).
pub const SCENARIO_DIR_ENV: &str = "RARE_SCENARIO_DIR";

/// Minimum carrier-to-IF ratio ωₙ/δₙ. The band model drops terms rotating
/// at ωₙ ± δₙ when forming the slow envelope, which requires the carrier to
/// tower over the intermediate frequency.
pub const CARRIER_IF_MIN_RATIO: f64 = 1e3;

/// Errors from scenario loading and validation.
#[derive(Debug, Error)]
pub enum ScenarioError {
    /// Scenario file could not be read.
    #[error("cannot read scenario file `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// A line was not `key = value`, a value failed to parse, or a key was
    /// repeated.
    #[error("scenario parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A required key was absent (no default available).
    #[error("missing required scenario key `{key}`")]
    MissingKey { key: String },
    /// A key is not part of the scenario schema.
    #[error("unknown scenario key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },
    /// A cross-field invariant failed; the message names the invariant.
    #[error("scenario validation failed: {msg}")]
    Validation { msg: String },
}

/// Per-band service carried over one RF band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandService {
    /// Square-QAM communication with the given constellation order.
    Comm { order: usize },
    /// Displacement sensing (uniform prior over the unambiguous interval).
    Sense,
}

impl BandService {
    fn parse(token: &str) -> Option<Self> {
        match token {
            "comm4" => Some(BandService::Comm { order: 4 }),
            "comm16" => Some(BandService::Comm { order: 16 }),
            "comm64" => Some(BandService::Comm { order: 64 }),
            "comm256" => Some(BandService::Comm { order: 256 }),
            "sense" => Some(BandService::Sense),
            _ => None,
        }
    }

    fn token(&self) -> &'static str {
        match self {
            BandService::Comm { order: 4 } => "comm4",
            BandService::Comm { order: 16 } => "comm16",
            BandService::Comm { order: 64 } => "comm64",
            BandService::Comm { order: 256 } => "comm256",
            BandService::Comm { .. } => unreachable!("constructed only from valid orders"),
            BandService::Sense => "sense",
        }
    }
}

/// Atomic, laser, and cell parameters.
///
/// Fields hold the scenario-file unit convention verbatim (suffix spells
/// the unit); the accessor methods return SI quantities. Keeping the file
/// representation authoritative makes serialize→load round trips exact.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomScenario {
    /// Number of RF bands N ≥ 1.
    pub n_bands: usize,
    /// Probe Rabi frequency Ωₚ, in MHz of ordinary frequency (file units).
    pub omega_p_rabi_mhz: f64,
    /// Coupling Rabi frequency Ω_c, MHz.
    pub omega_c_rabi_mhz: f64,
    /// Excited-level decay rate γ₂, MHz.
    pub gamma2_mhz: f64,
    /// First Rydberg level decay rate γ₃, MHz; 0 selects the simplified
    /// relaxation model in which only the excited level decays.
    pub gamma3_mhz: f64,
    /// Atomic density N₀, cm⁻³.
    pub atom_density_per_cm3: f64,
    /// Vapor cell length L, cm.
    pub cell_length_cm: f64,
    /// Probe wavelength λₚ, nm.
    pub probe_wavelength_nm: f64,
    /// Probe input power P_in, µW.
    pub probe_power_in_uw: f64,
    /// Probe transition dipole moment, in units of q·a₀.
    pub probe_dipole_qa0: f64,
    /// Ambient temperature T_a, K.
    pub ambient_temperature_k: f64,
    /// Field conversion constant κ_field, (V/m)/√W: maps the square root of
    /// received RF power to the field amplitude at the cell. The model's one
    /// free constant (absorbs antenna aperture and cell geometry).
    pub field_conversion: f64,
}

impl AtomScenario {
    /// Probe Rabi frequency Ωₚ (rad/s).
    pub fn omega_p_rabi(&self) -> f64 {
        self.omega_p_rabi_mhz * 1e6 * TWO_PI
    }

    /// Coupling Rabi frequency Ω_c (rad/s).
    pub fn omega_c_rabi(&self) -> f64 {
        self.omega_c_rabi_mhz * 1e6 * TWO_PI
    }

    /// Excited-level decay rate γ₂ (rad/s).
    pub fn gamma2(&self) -> f64 {
        self.gamma2_mhz * 1e6 * TWO_PI
    }

    /// First-Rydberg-level decay rate γ₃ (rad/s); 0 in the simplified model.
    pub fn gamma3(&self) -> f64 {
        self.gamma3_mhz * 1e6 * TWO_PI
    }

    /// Atomic density N₀ (m⁻³).
    pub fn atomic_density(&self) -> f64 {
        self.atom_density_per_cm3 * 1e6
    }

    /// Cell length L (m).
    pub fn cell_length(&self) -> f64 {
        self.cell_length_cm * 1e-2
    }

    /// Probe wavelength λₚ (m).
    pub fn probe_wavelength(&self) -> f64 {
        self.probe_wavelength_nm * 1e-9
    }

    /// Probe input power P_in (W).
    pub fn probe_power_in(&self) -> f64 {
        self.probe_power_in_uw * 1e-6
    }

    /// Probe transition dipole moment μ (C·m).
    pub fn mu_probe(&self) -> f64 {
        self.probe_dipole_qa0 * QA0
    }

    /// Ambient temperature T_a (K).
    pub fn ambient_temp(&self) -> f64 {
        self.ambient_temperature_k
    }

    /// Field conversion constant κ_field ((V/m)/√W).
    pub fn kappa_field(&self) -> f64 {
        self.field_conversion
    }

    /// Checks every single-field invariant, naming the violated one.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let check_pos = |name: &str, v: f64| -> Result<(), ScenarioError> {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::Validation {
                    msg: format!("{name} must be positive and finite, got {v}"),
                });
            }
            Ok(())
        };
        if self.n_bands < 1 {
            return Err(ScenarioError::Validation {
                msg: "n_bands must be at least 1".into(),
            });
        }
        check_pos("omega_p_rabi", self.omega_p_rabi_mhz)?;
        check_pos("omega_c_rabi", self.omega_c_rabi_mhz)?;
        check_pos("gamma2", self.gamma2_mhz)?;
        check_pos("atom_density", self.atom_density_per_cm3)?;
        check_pos("cell_length", self.cell_length_cm)?;
        check_pos("probe_wavelength", self.probe_wavelength_nm)?;
        check_pos("probe_power_in", self.probe_power_in_uw)?;
        check_pos("probe_dipole", self.probe_dipole_qa0)?;
        check_pos("ambient_temperature", self.ambient_temperature_k)?;
        check_pos("field_conversion", self.field_conversion)?;
        if !(self.gamma3_mhz.is_finite() && self.gamma3_mhz >= 0.0) {
            return Err(ScenarioError::Validation {
                msg: format!("gamma3 must be nonnegative and finite, got {}", self.gamma3_mhz),
            });
        }
        let d = derive_constants(self);
        if !(d.rho0 > 0.0 && d.rho0 < 1.0) {
            return Err(ScenarioError::Validation {
                msg: format!("derived rho0 must lie in (0,1), got {}", d.rho0),
            });
        }
        Ok(())
    }
}

/// One RF band of the plan. File-unit fields with SI accessors, mirroring
/// [`AtomScenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    /// Carrier frequency ωₙ/2π, GHz.
    pub carrier_ghz: f64,
    /// Intermediate frequency δₙ/2π, kHz (offset between reference and data
    /// tones).
    pub if_khz: f64,
    /// Occupied bandwidth Bₙ, kHz.
    pub bandwidth_khz: f64,
    /// RF transition dipole moment μₙ, in q·a₀.
    pub dipole_qa0: f64,
    /// Channel power gain |hₙ|², dB.
    pub channel_gain_db: f64,
    /// Channel phase ∠hₙ, degrees.
    pub channel_phase_deg: f64,
    /// Transmit power P_t,n, dBm.
    pub transmit_power_dbm: f64,
    /// Reference-tone Rabi frequency Ω_r,n/2π, MHz.
    pub ref_rabi_mhz: f64,
    /// Decay rate of this band's Rydberg level, kHz of ordinary frequency;
    /// 0 under the simplified relaxation model.
    pub decay_khz: f64,
    /// Service carried on this band.
    pub service: BandService,
}

impl Band {
    /// Carrier angular frequency ωₙ (rad/s).
    pub fn omega(&self) -> f64 {
        self.carrier_ghz * 1e9 * TWO_PI
    }

    /// Intermediate angular frequency δₙ (rad/s).
    pub fn delta(&self) -> f64 {
        self.if_khz * 1e3 * TWO_PI
    }

    /// Occupied bandwidth Bₙ (Hz).
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_khz * 1e3
    }

    /// RF transition dipole moment μₙ (C·m).
    pub fn mu(&self) -> f64 {
        self.dipole_qa0 * QA0
    }

    /// Complex channel coefficient hₙ (field ratio, dimensionless).
    pub fn channel(&self) -> num_complex::Complex<f64> {
        let mag = 10f64.powf(self.channel_gain_db / 20.0);
        let phase = self.channel_phase_deg.to_radians();
        num_complex::Complex::from_polar(mag, phase)
    }

    /// Channel power gain |hₙ|² (dimensionless).
    pub fn channel_gain_sq(&self) -> f64 {
        10f64.powf(self.channel_gain_db / 10.0)
    }

    /// Transmit power P_t,n (W).
    pub fn pt(&self) -> f64 {
        10f64.powf((self.transmit_power_dbm - 30.0) / 10.0)
    }

    /// Reference-tone Rabi frequency Ω_r,n (rad/s).
    pub fn omega_r(&self) -> f64 {
        self.ref_rabi_mhz * 1e6 * TWO_PI
    }

    /// Rydberg-level decay rate for this band (rad/s).
    pub fn gamma_rf(&self) -> f64 {
        self.decay_khz * 1e3 * TWO_PI
    }
}

/// Validated collection of RF bands, ascending in intermediate frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPlan {
    bands: Vec<Band>,
}

impl BandPlan {
    /// Validates and wraps a band list. Invariants: at least one band;
    /// positive bandwidths and dipoles; strictly ascending IFs; adjacent
    /// IF spacing above the mean occupied bandwidth (orthogonality margin);
    /// carriers at least [`CARRIER_IF_MIN_RATIO`] times their IF.
    pub fn new(bands: Vec<Band>) -> Result<Self, ScenarioError> {
        if bands.is_empty() {
            return Err(ScenarioError::Validation {
                msg: "band plan must contain at least one band".into(),
            });
        }
        for (i, b) in bands.iter().enumerate() {
            let n = i + 1;
            for (what, v) in [
                ("carrier", b.carrier_ghz),
                ("IF", b.if_khz),
                ("bandwidth", b.bandwidth_khz),
                ("dipole", b.dipole_qa0),
                ("reference Rabi frequency", b.ref_rabi_mhz),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ScenarioError::Validation {
                        msg: format!("band {n}: {what} must be positive and finite, got {v}"),
                    });
                }
            }
            if !(b.decay_khz.is_finite() && b.decay_khz >= 0.0) {
                return Err(ScenarioError::Validation {
                    msg: format!("band {n}: decay must be nonnegative, got {}", b.decay_khz),
                });
            }
            if !b.channel_gain_db.is_finite()
                || !b.channel_phase_deg.is_finite()
                || !b.transmit_power_dbm.is_finite()
            {
                return Err(ScenarioError::Validation {
                    msg: format!("band {n}: channel/power figures must be finite"),
                });
            }
            if b.omega() < CARRIER_IF_MIN_RATIO * b.delta() {
                return Err(ScenarioError::Validation {
                    msg: format!(
                        "band {n}: carrier-to-IF ratio too small ({:.3e} < {CARRIER_IF_MIN_RATIO:.0e}); \
                         the slow-envelope model needs omega_n >> delta_n",
                        b.omega() / b.delta()
                    ),
                });
            }
        }
        for i in 1..bands.len() {
            let (lo, hi) = (&bands[i - 1], &bands[i]);
            if hi.delta() <= lo.delta() {
                return Err(ScenarioError::Validation {
                    msg: format!(
                        "IF ordering violated: band {} IF {} kHz must exceed band {} IF {} kHz",
                        i + 1,
                        hi.if_khz,
                        i,
                        lo.if_khz
                    ),
                });
            }
            let spacing_hz = (hi.delta() - lo.delta()) / TWO_PI;
            let mean_bw = 0.5 * (lo.bandwidth() + hi.bandwidth());
            if spacing_hz <= mean_bw {
                return Err(ScenarioError::Validation {
                    msg: format!(
                        "orthogonality margin violated between bands {} and {}: IF spacing \
                         {spacing_hz} Hz must exceed the mean occupied bandwidth {mean_bw} Hz",
                        i,
                        i + 1
                    ),
                });
            }
        }
        Ok(BandPlan { bands })
    }

    /// The bands, ascending in IF.
    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    /// Number of bands N.
    pub fn len(&self) -> usize {
        self.bands.len()
    }

    /// True when the plan is empty (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Total occupied bandwidth ΣBₙ (Hz).
    pub fn total_bandwidth(&self) -> f64 {
        self.bands.iter().map(|b| b.bandwidth()).sum()
    }

    /// Bandwidth fractions γₙ = Bₙ/ΣBₘ (sum to 1).
    pub fn bandwidth_weights(&self) -> Vec<f64> {
        let total = self.total_bandwidth();
        self.bands.iter().map(|b| b.bandwidth() / total).collect()
    }

    /// Reference Rabi magnitudes (Ω_r,1 … Ω_r,N) in rad/s.
    pub fn reference_rabi(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.omega_r()).collect()
    }
}

/// Constants derived from an [`AtomScenario`]; every other module consumes
/// these rather than re-deriving them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// ρ₀ = γ₂Ωₚ/(γ₂² + 2Ωₚ²): saturation amplitude of the probe coherence
    /// (dimensionless, in (0,1)).
    pub rho0: f64,
    /// Saturation constant Γ² = 2Ωₚ²(Ω_c² + Ωₚ²)/(γ₂² + 2Ωₚ²), (rad/s)².
    pub big_gamma_sq: f64,
    /// Optical-depth coefficient C₀ = 2N₀μ²kₚL/(ε₀ħΩₚ) (dimensionless).
    pub c0: f64,
    /// χ₀ = ρ₀·C₀, the peak absorption exponent (dimensionless).
    pub chi0: f64,
    /// Probe wavenumber kₚ = 2π/λₚ (m⁻¹).
    pub kp: f64,
    /// Probe optical angular frequency ωₚ = 2πc/λₚ (rad/s).
    pub omega_probe: f64,
    /// Photon-shot-noise coefficient C₁ = ħωₚ (J).
    pub c1: f64,
}

/// Evaluates the derived constants in closed form.
pub fn derive_constants(s: &AtomScenario) -> DerivedConstants {
    let omega_p = s.omega_p_rabi();
    let omega_c = s.omega_c_rabi();
    let gamma2 = s.gamma2();
    let rho0 = gamma2 * omega_p / (gamma2 * gamma2 + 2.0 * omega_p * omega_p);
    let big_gamma_sq = 2.0 * omega_p * omega_p * (omega_c * omega_c + omega_p * omega_p)
        / (gamma2 * gamma2 + 2.0 * omega_p * omega_p);
    let kp = TWO_PI / s.probe_wavelength();
    let mu = s.mu_probe();
    let c0 = 2.0 * s.atomic_density() * mu * mu * kp * s.cell_length() / (EPS0 * HBAR * omega_p);
    let chi0 = rho0 * c0;
    let omega_probe = TWO_PI * C_LIGHT / s.probe_wavelength();
    let c1 = HBAR * omega_probe;
    DerivedConstants {
        rho0,
        big_gamma_sq,
        c0,
        chi0,
        kp,
        omega_probe,
        c1,
    }
}

// ---------------------------------------------------------------------------
// Defaults and file parsing
// ---------------------------------------------------------------------------

/// Scalar keys and their defaults (the cesium laboratory setup).
const SCALAR_DEFAULTS: &[(&str, &str)] = &[
    ("n_bands", "2"),
    ("omega_p_rabi_mhz_over_2pi", "5.7"),
    ("omega_c_rabi_mhz_over_2pi", "0.97"),
    ("gamma2_mhz_over_2pi", "5.2"),
    ("gamma3_mhz_over_2pi", "0"),
    ("atom_density_per_cm3", "4.89e10"),
    ("cell_length_cm", "2"),
    ("probe_wavelength_nm", "852.94"),
    ("probe_power_in_uw", "120"),
    ("probe_dipole_qa0", "2.586"),
    ("ambient_temperature_k", "290"),
    ("field_conversion_v_per_m_per_sqrt_w", "10"),
];

/// Per-band defaults, available only for the two-band layout.
const BAND_DEFAULTS: &[(&str, &str)] = &[
    ("band.1.carrier_ghz_over_2pi", "3.212"),
    ("band.1.if_khz_over_2pi", "100"),
    ("band.1.bandwidth_khz", "80"),
    ("band.1.dipole_qa0", "2410"),
    ("band.1.channel_gain_db", "-90"),
    ("band.1.transmit_power_dbm", "20"),
    ("band.2.carrier_ghz_over_2pi", "30.628"),
    ("band.2.if_khz_over_2pi", "200"),
    ("band.2.bandwidth_khz", "80"),
    ("band.2.dipole_qa0", "736.452"),
    ("band.2.channel_gain_db", "-90"),
    ("band.2.transmit_power_dbm", "20"),
];

struct KvFile {
    /// key -> (line number, raw value); entries are removed as consumed.
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut entries = BTreeMap::new();
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
            let (key, value) = stripped.split_once('=').ok_or(ScenarioError::Parse {
                line,
                msg: format!("expected `key = value`, got `{stripped}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ScenarioError::Parse {
                    line,
                    msg: "empty key or value".into(),
                });
            }
            if entries.insert(key.clone(), (line, value)).is_some() {
                return Err(ScenarioError::Parse {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KvFile { entries })
    }

    /// Removes and returns the raw value for `key`, falling back to the
    /// defaults table; errors if neither exists.
    fn take_raw(&mut self, key: &str, defaults_on: bool) -> Result<(usize, String), ScenarioError> {
        if let Some(found) = self.entries.remove(key) {
            return Ok(found);
        }
        if defaults_on {
            for table in [SCALAR_DEFAULTS, BAND_DEFAULTS] {
                if let Some((_, v)) = table.iter().find(|(k, _)| *k == key) {
                    return Ok((0, (*v).to_string()));
                }
            }
        }
        Err(ScenarioError::MissingKey { key: key.to_string() })
    }

    fn take_f64(&mut self, key: &str, defaults_on: bool) -> Result<f64, ScenarioError> {
        let (line, raw) = self.take_raw(key, defaults_on)?;
        let v: f64 = raw.parse().map_err(|_| ScenarioError::Parse {
            line,
            msg: format!("key `{key}`: `{raw}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(ScenarioError::Parse {
                line,
                msg: format!("key `{key}`: value must be finite, got `{raw}`"),
            });
        }
        Ok(v)
    }

    /// Like [`take_f64`] but with an explicit (non-table) default.
    fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64, ScenarioError> {
        match self.take_f64(key, false) {
            Ok(v) => Ok(v),
            Err(ScenarioError::MissingKey { .. }) => Ok(default),
            Err(e) => Err(e),
        }
    }
}

/// Loads, validates, and derives a scenario from a file.
///
/// Relative paths are resolved against the directory named by the
/// [`SCENARIO_DIR_ENV`] environment variable when it is set, otherwise
/// against the working directory.
pub fn load_scenario(path: &str) -> Result<(AtomScenario, BandPlan, DerivedConstants), ScenarioError> {
    let given = Path::new(path);
    let resolved: PathBuf = match std::env::var(SCENARIO_DIR_ENV) {
        Ok(dir) if given.is_relative() => Path::new(&dir).join(given),
        _ => given.to_path_buf(),
    };
    let text = std::fs::read_to_string(&resolved).map_err(|source| ScenarioError::Io {
        path: resolved.display().to_string(),
        source,
    })?;
    scenario_from_str(&text)
}

/// Builds the default scenario (every key at its documented default).
pub fn default_scenario() -> (AtomScenario, BandPlan, DerivedConstants) {
    scenario_from_str("").expect("builtin defaults must be a valid scenario")
}

/// Parses scenario text (see module docs for the format).
pub fn scenario_from_str(text: &str) -> Result<(AtomScenario, BandPlan, DerivedConstants), ScenarioError> {
    let mut kv = KvFile::parse(text)?;

    let (n_line, n_raw) = kv.take_raw("n_bands", true)?;
    let n_bands: usize = n_raw.parse().map_err(|_| ScenarioError::Parse {
        line: n_line,
        msg: format!("key `n_bands`: `{n_raw}` is not a positive integer"),
    })?;

    let scenario = AtomScenario {
        n_bands,
        omega_p_rabi_mhz: kv.take_f64("omega_p_rabi_mhz_over_2pi", true)?,
        omega_c_rabi_mhz: kv.take_f64("omega_c_rabi_mhz_over_2pi", true)?,
        gamma2_mhz: kv.take_f64("gamma2_mhz_over_2pi", true)?,
        gamma3_mhz: kv.take_f64("gamma3_mhz_over_2pi", true)?,
        atom_density_per_cm3: kv.take_f64("atom_density_per_cm3", true)?,
        cell_length_cm: kv.take_f64("cell_length_cm", true)?,
        probe_wavelength_nm: kv.take_f64("probe_wavelength_nm", true)?,
        probe_power_in_uw: kv.take_f64("probe_power_in_uw", true)?,
        probe_dipole_qa0: kv.take_f64("probe_dipole_qa0", true)?,
        ambient_temperature_k: kv.take_f64("ambient_temperature_k", true)?,
        field_conversion: kv.take_f64("field_conversion_v_per_m_per_sqrt_w", true)?,
    };
    scenario.validate()?;
    let derived = derive_constants(&scenario);

    // Default reference Rabi: equal-attention split of the optimal sum-square.
    let a_star = optimal_sum_square(derived.chi0, derived.big_gamma_sq);
    let ref_default_mhz = (a_star / n_bands as f64).sqrt() / (1e6 * TWO_PI);

    // Per-band defaults exist only for the documented two-band layout.
    let band_defaults_on = n_bands == 2;
    let mut bands = Vec::with_capacity(n_bands);
    for i in 1..=n_bands {
        let key = |field: &str| format!("band.{i}.{field}");
        let service_raw = match kv.take_raw(&key("service"), false) {
            Ok((line, raw)) => Some((line, raw)),
            Err(ScenarioError::MissingKey { .. }) => None,
            Err(e) => return Err(e),
        };
        let service = match service_raw {
            None => BandService::Comm { order: 4 },
            Some((line, raw)) => BandService::parse(&raw).ok_or(ScenarioError::Parse {
                line,
                msg: format!(
                    "key `{}`: unknown service `{raw}` (expected comm4|comm16|comm64|comm256|sense)",
                    key("service")
                ),
            })?,
        };
        bands.push(Band {
            carrier_ghz: kv.take_f64(&key("carrier_ghz_over_2pi"), band_defaults_on)?,
            if_khz: kv.take_f64(&key("if_khz_over_2pi"), band_defaults_on)?,
            bandwidth_khz: kv.take_f64(&key("bandwidth_khz"), band_defaults_on)?,
            dipole_qa0: kv.take_f64(&key("dipole_qa0"), band_defaults_on)?,
            channel_gain_db: kv.take_f64(&key("channel_gain_db"), band_defaults_on)?,
            channel_phase_deg: kv.take_f64_or(&key("channel_phase_deg"), 0.0)?,
            transmit_power_dbm: kv.take_f64(&key("transmit_power_dbm"), band_defaults_on)?,
            ref_rabi_mhz: kv.take_f64_or(&key("ref_rabi_mhz_over_2pi"), ref_default_mhz)?,
            decay_khz: kv.take_f64_or(&key("decay_khz_over_2pi"), 0.0)?,
            service,
        });
    }
    let plan = BandPlan::new(bands)?;

    if let Some((key, (line, _))) = kv.entries.pop_first() {
        return Err(ScenarioError::UnknownKey { key, line });
    }
    Ok((scenario, plan, derived))
}

/// Serializes a scenario and band plan back to the file format. Loading the
/// output reproduces every derived constant bit for bit (values are emitted
/// in the stored file units with shortest-round-trip formatting).
pub fn scenario_to_string(s: &AtomScenario, plan: &BandPlan) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    push("n_bands", s.n_bands.to_string());
    push("omega_p_rabi_mhz_over_2pi", s.omega_p_rabi_mhz.to_string());
    push("omega_c_rabi_mhz_over_2pi", s.omega_c_rabi_mhz.to_string());
    push("gamma2_mhz_over_2pi", s.gamma2_mhz.to_string());
    push("gamma3_mhz_over_2pi", s.gamma3_mhz.to_string());
    push("atom_density_per_cm3", s.atom_density_per_cm3.to_string());
    push("cell_length_cm", s.cell_length_cm.to_string());
    push("probe_wavelength_nm", s.probe_wavelength_nm.to_string());
    push("probe_power_in_uw", s.probe_power_in_uw.to_string());
    push("probe_dipole_qa0", s.probe_dipole_qa0.to_string());
    push("ambient_temperature_k", s.ambient_temperature_k.to_string());
    push("field_conversion_v_per_m_per_sqrt_w", s.field_conversion.to_string());
    for (i, b) in plan.bands().iter().enumerate() {
        let n = i + 1;
        push(&format!("band.{n}.carrier_ghz_over_2pi"), b.carrier_ghz.to_string());
        push(&format!("band.{n}.if_khz_over_2pi"), b.if_khz.to_string());
        push(&format!("band.{n}.bandwidth_khz"), b.bandwidth_khz.to_string());
        push(&format!("band.{n}.dipole_qa0"), b.dipole_qa0.to_string());
        push(&format!("band.{n}.channel_gain_db"), b.channel_gain_db.to_string());
        push(&format!("band.{n}.channel_phase_deg"), b.channel_phase_deg.to_string());
        push(&format!("band.{n}.transmit_power_dbm"), b.transmit_power_dbm.to_string());
        push(&format!("band.{n}.ref_rabi_mhz_over_2pi"), b.ref_rabi_mhz.to_string());
        push(&format!("band.{n}.decay_khz_over_2pi"), b.decay_khz.to_string());
        push(&format!("band.{n}.service"), b.service.token().to_string());
    }
    out
}
