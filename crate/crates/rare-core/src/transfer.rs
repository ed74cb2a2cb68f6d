//! Probe-power transfer chain: from RF band signals through the atomic
//! steady state to the measured probe-laser power.
//!
//! The receiver reads RF fields out of the vapor cell as intensity
//! modulation of the transmitted probe laser. This module owns that chain:
//!
//! * the nonlinear transmission law 𝒫(Ω) = P_in·exp(−χ₀·S/(S+Γ²)), with
//!   S = ΣΩₙ² the Rabi sum-square of the RF drives;
//! * its exact gradient and the strong-reference linearization
//!   𝒫(t) ≈ 𝒫ᵣ + Σₙ κₙ·Re{E_s,n·e^{j(δₙt−∠E_r,n)}};
//! * the gain decomposition κₙ = ϱ₀·√αₙ·μₙ (global gain × Rabi attention ×
//!   dipole moment) over a chosen operating point (𝒜, α);
//! * waveform synthesis along three routes of increasing physical fidelity
//!   (linearized, quasi-static, full master-equation evolution);
//! * the two-component noise model (photon shot noise plus blackbody
//!   radiation) and the per-band signal-to-noise ratio.
//!
//! Everything is a pure function of the scenario. The attention-allocation
//! problems consumed by [`crate::optimizer`] are assembled at the bottom of
//! this module, so their coefficient formulas sit next to the physics they
//! are read off from.

use num_complex::Complex;
use thiserror::Error;

use crate::constants::{C_LIGHT, EPS0, HBAR, KB, TWO_PI};
use crate::optimizer::{OptimizerError, SeAllocationProblem, SenseAllocationProblem};
use crate::quantum::rk4::STEP_GUARD;
use crate::quantum::{
    evolve_rk4_sampled, steady_state_numeric, DensityMatrix, QuantumError, RabiVector,
    RelaxationModel,
};
use crate::scenario::{derive_constants, AtomScenario, Band, BandPlan};

/// Default minimum Ω_r/Ω_s ratio (40 dB) below which the linearized path is
/// refused: the first-order expansion of |E_r + E_s·e^{jδt}| around the
/// reference amplitude needs the data tone to be a small perturbation.
pub const STRONG_REFERENCE_MIN_RATIO: f64 = 100.0;

/// Waveform sample rates must exceed this factor times the highest
/// intermediate frequency (in Hz) so the per-band mixing products stay
/// resolvable during demodulation.
pub const MIN_OVERSAMPLING_FACTOR: f64 = 4.0;

/// Acceptance tolerance on Σαₙ for attention vectors handed to
/// [`gain_decomposition`]. Inputs inside this bound are renormalized so the
/// stored model satisfies the 1e-12 sum invariant; inputs outside it are
/// rejected as genuinely off the simplex (iterative allocators deliver
/// sums correct to ~1e-10, so silently accepting coarser vectors would hide
/// real bugs).
pub const ATTENTION_INPUT_TOL: f64 = 1e-6;

/// Sum tolerance enforced on the attention vector stored in a
/// [`TransferModel`].
const ATTENTION_MODEL_TOL: f64 = 1e-12;

/// Fraction of the RK4 stability-guard step actually used when choosing
/// waveform substeps; the margin keeps reordered but algebraically equal
/// step expressions from tripping the guard by a rounding ulp.
const RK4_STEP_MARGIN: f64 = 0.9;

/// Errors from the transfer chain.
#[derive(Debug, Error)]
pub enum TransferError {
    /// A band's reference tone is not strong enough for the linearized path.
    /// `band` is the 1-based position in the signal list.
    #[error(
        "band {band}: reference-to-data Rabi ratio {ratio:.3e} is below the \
         strong-reference minimum {min_ratio:.3e}; the linearized path is invalid"
    )]
    WeakReference {
        band: usize,
        ratio: f64,
        min_ratio: f64,
    },
    /// A band signal failed validation (non-finite amplitude, negative IF,
    /// nonpositive dipole, or an empty signal list).
    #[error("invalid band signal: {msg}")]
    InvalidSignal { msg: String },
    /// The Rabi sum-square handed to the gain decomposition must be positive
    /// and finite.
    #[error("invalid Rabi sum-square {a:e}: must be positive and finite")]
    InvalidSumSquare { a: f64 },
    /// The attention vector violates the simplex constraints.
    #[error("invalid attention vector: {msg}")]
    InvalidAttention { msg: String },
    /// A per-band vector does not match the band plan.
    #[error("band count mismatch in {context}: expected {expected}, got {got}")]
    BandCountMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    /// The waveform request itself is malformed (nonpositive duration or
    /// sample rate, empty sample vector, non-finite samples).
    #[error("invalid waveform request: {msg}")]
    InvalidWaveform { msg: String },
    /// The sample rate cannot resolve the band plan's intermediate
    /// frequencies.
    #[error(
        "sample rate {sample_rate:.3e} Hz is below the required {required:.3e} Hz \
         (must exceed {MIN_OVERSAMPLING_FACTOR} times the highest IF)"
    )]
    Undersampled { sample_rate: f64, required: f64 },
    /// The underlying quantum evolution failed (divergence, step guard, ...).
    #[error("quantum evolution failed during waveform synthesis: {0}")]
    Quantum(#[from] QuantumError),
    /// An allocation problem built from this operating point failed its own
    /// validation.
    #[error("allocation problem construction failed: {0}")]
    Allocation(#[from] OptimizerError),
}

// ---------------------------------------------------------------------------
// Band signals
// ---------------------------------------------------------------------------

/// One band's baseband description at the vapor cell: a reference tone E_r,
/// a data tone E_s offset by the intermediate frequency δ, and the dipole
/// moment μ of the Rydberg transition that converts field amplitude (V/m)
/// into Rabi frequency (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSignal {
    e_r: Complex<f64>,
    e_s: Complex<f64>,
    delta: f64,
    mu: f64,
}

impl BandSignal {
    /// Validates and builds a band signal. The amplitudes must be finite,
    /// the IF nonnegative and the dipole moment positive.
    pub fn new(
        e_r: Complex<f64>,
        e_s: Complex<f64>,
        delta: f64,
        mu: f64,
    ) -> Result<Self, TransferError> {
        for (what, z) in [("reference amplitude", e_r), ("data amplitude", e_s)] {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(TransferError::InvalidSignal {
                    msg: format!("{what} must be finite, got {z}"),
                });
            }
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(TransferError::InvalidSignal {
                msg: format!("intermediate frequency must be nonnegative and finite, got {delta}"),
            });
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(TransferError::InvalidSignal {
                msg: format!("dipole moment must be positive and finite, got {mu}"),
            });
        }
        Ok(BandSignal { e_r, e_s, delta, mu })
    }

    /// Builds the signal for a planned band: the reference amplitude is set
    /// from the plan's reference Rabi frequency (real, zero phase), the IF
    /// and dipole moment are taken from the plan, and `e_s` carries the data.
    pub fn from_band(band: &Band, e_s: Complex<f64>) -> Result<Self, TransferError> {
        let e_r = Complex::new(HBAR * band.omega_r() / band.mu(), 0.0);
        BandSignal::new(e_r, e_s, band.delta(), band.mu())
    }

    /// Reference baseband amplitude E_r (V/m).
    pub fn e_r(&self) -> Complex<f64> {
        self.e_r
    }

    /// Data baseband amplitude E_s (V/m).
    pub fn e_s(&self) -> Complex<f64> {
        self.e_s
    }

    /// Intermediate frequency δ (rad/s).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Transition dipole moment μ (C·m).
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Reference Rabi frequency Ω_r = (μ/ħ)|E_r| (rad/s).
    pub fn omega_r(&self) -> f64 {
        self.mu / HBAR * self.e_r.norm()
    }

    /// Data Rabi frequency Ω_s = (μ/ħ)|E_s| (rad/s).
    pub fn omega_s(&self) -> f64 {
        self.mu / HBAR * self.e_s.norm()
    }

    /// Phase difference ∠E_s − ∠E_r (rad).
    pub fn phase_offset(&self) -> f64 {
        self.e_s.arg() - self.e_r.arg()
    }

    /// Instantaneous envelope Rabi magnitude Ω(t) = (μ/ħ)|E_r + E_s·e^{jδt}|
    /// (rad/s): the exact beat between the reference and data tones.
    pub fn omega_at(&self, t: f64) -> f64 {
        self.mu / HBAR * (self.e_r + self.e_s * Complex::from_polar(1.0, self.delta * t)).norm()
    }

    /// True when the reference tone dominates the data tone by at least
    /// `min_ratio` in Rabi frequency. A band with no data tone always
    /// qualifies.
    pub fn meets_strong_reference(&self, min_ratio: f64) -> bool {
        self.omega_r() >= min_ratio * self.omega_s()
    }
}

/// Checks the strong-reference invariant on every band, naming the first
/// violator (1-based) on failure.
pub fn check_strong_reference(bands: &[BandSignal], min_ratio: f64) -> Result<(), TransferError> {
    for (i, b) in bands.iter().enumerate() {
        if !b.meets_strong_reference(min_ratio) {
            return Err(TransferError::WeakReference {
                band: i + 1,
                ratio: b.omega_r() / b.omega_s(),
                min_ratio,
            });
        }
    }
    Ok(())
}

/// Received data-field amplitude |E_s| = κ_field·√(|h|²·P_t) (V/m) for a
/// unit-energy symbol on the given band. κ_field is the scenario's explicit
/// power-to-field conversion constant; the channel gain and transmit power
/// never enter the physics except through this product.
pub fn received_field_amplitude(s: &AtomScenario, band: &Band) -> f64 {
    s.kappa_field() * (band.channel_gain_sq() * band.pt()).sqrt()
}

// ---------------------------------------------------------------------------
// Nonlinear transmission law and its gradient
// ---------------------------------------------------------------------------

/// Transmitted probe power 𝒫(Ω) = P_in·exp(−χ₀·S/(S+Γ²)) (W) for the RF
/// Rabi vector Ω with sum-square S.
pub fn probe_power(s: &AtomScenario, omega: &RabiVector) -> f64 {
    probe_power_sum_square(s, omega.sum_square())
}

/// Transmitted probe power as a function of the Rabi sum-square 𝒜 alone:
/// 𝒫 = P_in·exp(−χ₀·𝒜/(𝒜+Γ²)). The transmission depends on the RF drives
/// only through their sum-square, which is what makes the attention
/// decomposition exact.
pub fn probe_power_sum_square(s: &AtomScenario, a: f64) -> f64 {
    assert!(
        a.is_finite() && a >= 0.0,
        "Rabi sum-square must be nonnegative and finite, got {a}"
    );
    let d = derive_constants(s);
    s.probe_power_in() * (-d.chi0 * a / (a + d.big_gamma_sq)).exp()
}

/// Probe power read off an evolved state: 𝒫 = P_in·exp(−C₀·Im ρ₁₂). At the
/// steady state this reduces to [`probe_power`]; along a trajectory it maps
/// the instantaneous probe coherence to the instantaneous transmission.
pub fn probe_power_from_state(s: &AtomScenario, rho: &DensityMatrix) -> f64 {
    let d = derive_constants(s);
    s.probe_power_in() * (-d.c0 * rho.rho12().im).exp()
}

/// Exact gradient ∂𝒫/∂Ωₙ = −𝒫(Ω)·2χ₀Γ²Ωₙ/(S+Γ²)² (W·s/rad), one entry per
/// band.
///
/// The components are negative for positive Ωₙ: raising any RF Rabi
/// frequency deepens the absorption and lowers the transmitted power. The
/// positive gain magnitudes κₙ = |∂𝒫/∂Ωₙ|·μₙ/ħ used in the baseband model
/// come from [`gain_decomposition`]; the sign is restored where the
/// demodulator scales the mixed-down waveform.
pub fn power_gradient(s: &AtomScenario, omega: &RabiVector) -> Vec<f64> {
    let d = derive_constants(s);
    let ssq = omega.sum_square();
    let p = probe_power_sum_square(s, ssq);
    let denom = (ssq + d.big_gamma_sq) * (ssq + d.big_gamma_sq);
    omega
        .as_slice()
        .iter()
        .map(|&w| -p * 2.0 * d.chi0 * d.big_gamma_sq * w / denom)
        .collect()
}

// ---------------------------------------------------------------------------
// Linearized output
// ---------------------------------------------------------------------------

/// Precomputed pieces of the strong-reference linearization, shared between
/// the single-time evaluation and full waveform synthesis.
struct Linearization {
    p_r: f64,
    /// Per band: signed gain ∂𝒫/∂Ωₙ·μₙ/ħ (W per field unit), data
    /// amplitude, IF, and reference phase.
    terms: Vec<(f64, Complex<f64>, f64, f64)>,
}

impl Linearization {
    fn new(
        s: &AtomScenario,
        bands: &[BandSignal],
        min_ratio: f64,
    ) -> Result<Self, TransferError> {
        if bands.is_empty() {
            return Err(TransferError::InvalidSignal {
                msg: "at least one band signal is required".into(),
            });
        }
        check_strong_reference(bands, min_ratio)?;
        let omega_r = RabiVector::new(bands.iter().map(|b| b.omega_r()).collect())
            .map_err(|e| TransferError::InvalidSignal { msg: e.to_string() })?;
        let p_r = probe_power(s, &omega_r);
        let grad = power_gradient(s, &omega_r);
        let terms = bands
            .iter()
            .zip(grad)
            .map(|(b, g)| (g * b.mu() / HBAR, b.e_s(), b.delta(), b.e_r().arg()))
            .collect();
        Ok(Linearization { p_r, terms })
    }

    fn at(&self, t: f64) -> f64 {
        let mut p = self.p_r;
        for &(gain, e_s, delta, ref_phase) in &self.terms {
            p += gain * (e_s * Complex::from_polar(1.0, delta * t - ref_phase)).re;
        }
        p
    }
}

/// First-order probe power at time `t` under the strong-reference
/// expansion: 𝒫ᵣ + Σₙ (∂𝒫/∂Ω_r,n)(μₙ/ħ)·Re{E_s,n·e^{j(δₙt−∠E_r,n)}}, where
/// 𝒫ᵣ is the DC bias at the reference-only drive.
///
/// Errors with [`TransferError::WeakReference`] when any band's data tone
/// exceeds 1/[`STRONG_REFERENCE_MIN_RATIO`] of its reference tone.
pub fn linearized_output(
    s: &AtomScenario,
    bands: &[BandSignal],
    t: f64,
) -> Result<f64, TransferError> {
    linearized_output_with_ratio(s, bands, t, STRONG_REFERENCE_MIN_RATIO)
}

/// [`linearized_output`] with a caller-chosen strong-reference ratio.
pub fn linearized_output_with_ratio(
    s: &AtomScenario,
    bands: &[BandSignal],
    t: f64,
    min_ratio: f64,
) -> Result<f64, TransferError> {
    Ok(Linearization::new(s, bands, min_ratio)?.at(t))
}

// ---------------------------------------------------------------------------
// Waveform synthesis
// ---------------------------------------------------------------------------

/// Route used to turn band signals into a probe-power waveform, in order of
/// increasing physical fidelity (and cost).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// Strong-reference first-order expansion (DC bias + per-band beats).
    Linearized,
    /// Exact transmission law applied to the instantaneous envelope,
    /// assuming the atoms settle instantly (adiabatic steady state).
    QuasiStatic,
    /// Full master-equation evolution started from the steady state of the
    /// initial drive, mapped to power sample by sample.
    Rk4,
}

/// A uniformly sampled probe-power record.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformTrace {
    t0: f64,
    sample_rate: f64,
    samples: Vec<f64>,
}

impl WaveformTrace {
    /// Validates and wraps a sample record: positive finite sample rate,
    /// finite start time, at least one finite sample.
    pub fn new(t0: f64, sample_rate: f64, samples: Vec<f64>) -> Result<Self, TransferError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(TransferError::InvalidWaveform {
                msg: format!("sample rate must be positive and finite, got {sample_rate}"),
            });
        }
        if !t0.is_finite() {
            return Err(TransferError::InvalidWaveform {
                msg: format!("start time must be finite, got {t0}"),
            });
        }
        if samples.is_empty() {
            return Err(TransferError::InvalidWaveform {
                msg: "sample vector must not be empty".into(),
            });
        }
        if let Some((i, &bad)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TransferError::InvalidWaveform {
                msg: format!("sample {i} is not finite: {bad}"),
            });
        }
        Ok(WaveformTrace { t0, sample_rate, samples })
    }

    /// Start time of the first sample (s).
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Sample rate (Hz).
    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Probe-power samples (W).
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the trace holds no samples (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `i` (s).
    pub fn time_at(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    /// Covered duration len/rate (s).
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Instantaneous RF Rabi vector across all bands at time `t`.
fn rabi_at(bands: &[BandSignal], t: f64) -> RabiVector {
    RabiVector::new(bands.iter().map(|b| b.omega_at(t)).collect())
        .expect("band-signal envelopes are finite and nonnegative by construction")
}

/// Synthesizes the probe-power waveform over `[0, duration)` at
/// `sample_rate` along the chosen route.
///
/// The sample rate must exceed [`MIN_OVERSAMPLING_FACTOR`] times the highest
/// intermediate frequency. The linearized route additionally requires the
/// strong-reference invariant on every band; the quasi-static and
/// master-equation routes are exact in the band amplitudes. The
/// master-equation route starts from the steady state of the
/// t = 0 drive and subdivides each sample interval to respect the
/// integrator's stability guard, so its samples land exactly on the
/// requested grid.
pub fn synthesize_waveform(
    s: &AtomScenario,
    bands: &[BandSignal],
    duration: f64,
    sample_rate: f64,
    mode: SynthesisMode,
) -> Result<WaveformTrace, TransferError> {
    if bands.is_empty() {
        return Err(TransferError::InvalidSignal {
            msg: "at least one band signal is required".into(),
        });
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(TransferError::InvalidWaveform {
            msg: format!("duration must be positive and finite, got {duration}"),
        });
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(TransferError::InvalidWaveform {
            msg: format!("sample rate must be positive and finite, got {sample_rate}"),
        });
    }
    let max_if_hz = bands.iter().map(|b| b.delta()).fold(0.0, f64::max) / TWO_PI;
    let required = MIN_OVERSAMPLING_FACTOR * max_if_hz;
    if sample_rate <= required {
        return Err(TransferError::Undersampled { sample_rate, required });
    }
    let n = (duration * sample_rate).round().max(1.0) as usize;

    let samples = match mode {
        SynthesisMode::Linearized => {
            let lin = Linearization::new(s, bands, STRONG_REFERENCE_MIN_RATIO)?;
            (0..n).map(|i| lin.at(i as f64 / sample_rate)).collect()
        }
        SynthesisMode::QuasiStatic => (0..n)
            .map(|i| probe_power(s, &rabi_at(bands, i as f64 / sample_rate)))
            .collect(),
        SynthesisMode::Rk4 => {
            let rho0 = steady_state_numeric(s, &rabi_at(bands, 0.0))?;
            if n == 1 {
                vec![probe_power_from_state(s, &rho0)]
            } else {
                // The drive envelope never exceeds Ω_r + Ω_s on any band, so
                // a step chosen against that bound satisfies the integrator's
                // guard at every stage of the run.
                let mut rate = s
                    .omega_p_rabi()
                    .abs()
                    .max(s.omega_c_rabi().abs())
                    .max(s.gamma2());
                for b in bands {
                    rate = rate.max(b.omega_r() + b.omega_s());
                }
                let ts = 1.0 / sample_rate;
                let substeps = (ts / (RK4_STEP_MARGIN * STEP_GUARD / rate)).ceil().max(1.0) as usize;
                let dt = ts / substeps as f64;
                let t_end = (n - 1) as f64 * ts;
                let relax = RelaxationModel::Simplified { gamma2: s.gamma2() };
                let traj = evolve_rk4_sampled(
                    s,
                    |t| rabi_at(bands, t),
                    &rho0,
                    dt,
                    t_end,
                    substeps,
                    &relax,
                )?;
                // Rounding in ceil(t_end/dt) can add one final recorded state
                // a fraction of a substep past the grid; the first n recorded
                // states are the grid points.
                assert!(
                    traj.len() >= n,
                    "trajectory recorded {} states, expected at least {n}",
                    traj.len()
                );
                traj.states()[..n]
                    .iter()
                    .map(|st| probe_power_from_state(s, st))
                    .collect()
            }
        }
    };
    WaveformTrace::new(0.0, sample_rate, samples)
}

// ---------------------------------------------------------------------------
// Gain decomposition
// ---------------------------------------------------------------------------

/// Operating point of the transfer chain: the DC bias, global gain, and
/// per-band gain factors implied by a Rabi sum-square 𝒜 and an attention
/// split α over the planned bands.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferModel {
    p_r: f64,
    varrho0: f64,
    kappa: Vec<f64>,
    a_sum_square: f64,
    alpha: Vec<f64>,
}

impl TransferModel {
    /// DC bias 𝒫ᵣ = 𝒫(Ω_r) (W).
    pub fn p_r(&self) -> f64 {
        self.p_r
    }

    /// Global gain ϱ₀ = (2χ₀Γ²/ħ)·𝒫ᵣ·√𝒜/(𝒜+Γ²)² (W per C·m·field unit).
    pub fn varrho0(&self) -> f64 {
        self.varrho0
    }

    /// Per-band gain factors κₙ = ϱ₀·√αₙ·μₙ (W per field unit).
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// Rabi sum-square 𝒜 (rad²/s²).
    pub fn a_sum_square(&self) -> f64 {
        self.a_sum_square
    }

    /// Attention vector α (sums to 1 within 1e-12).
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Number of bands.
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    /// True when the model covers no bands (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Reference Rabi frequencies Ω_r,n = √(αₙ·𝒜) realizing this operating
    /// point (rad/s).
    pub fn reference_rabi(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .map(|&a| (a * self.a_sum_square).sqrt())
            .collect()
    }

    /// Sensitivity figure ϱ₀²/𝒫ᵣ: the squared global gain normalized by the
    /// DC bias, which every band's SNR increases with.
    pub fn gain_over_bias(&self) -> f64 {
        self.varrho0 * self.varrho0 / self.p_r
    }
}

/// Decomposes the operating point (𝒜, α) into DC bias, global gain, and
/// per-band gain factors: 𝒫ᵣ = P_in·e^{−χ₀𝒜/(𝒜+Γ²)},
/// ϱ₀ = (2χ₀Γ²/ħ)·𝒫ᵣ·√𝒜/(𝒜+Γ²)², κₙ = ϱ₀·√αₙ·μₙ.
///
/// The attention vector must be entrywise nonnegative with Σαₙ = 1 within
/// [`ATTENTION_INPUT_TOL`]; it is renormalized before storage so the model's
/// own invariant holds to 1e-12.
pub fn gain_decomposition(
    s: &AtomScenario,
    plan: &BandPlan,
    a: f64,
    alpha: &[f64],
) -> Result<TransferModel, TransferError> {
    if alpha.len() != plan.len() {
        return Err(TransferError::BandCountMismatch {
            expected: plan.len(),
            got: alpha.len(),
            context: "gain decomposition",
        });
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(TransferError::InvalidSumSquare { a });
    }
    for (i, &v) in alpha.iter().enumerate() {
        if !(v.is_finite() && v >= 0.0) {
            return Err(TransferError::InvalidAttention {
                msg: format!("entry {i} must be nonnegative and finite, got {v}"),
            });
        }
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > ATTENTION_INPUT_TOL {
        return Err(TransferError::InvalidAttention {
            msg: format!("entries must sum to 1 within {ATTENTION_INPUT_TOL:e}, got {sum}"),
        });
    }
    let alpha_norm: Vec<f64> = alpha.iter().map(|&v| v / sum).collect();
    let stored_sum: f64 = alpha_norm.iter().sum();
    assert!(
        (stored_sum - 1.0).abs() <= ATTENTION_MODEL_TOL,
        "normalized attention sum {stored_sum} drifted past {ATTENTION_MODEL_TOL:e}"
    );

    let d = derive_constants(s);
    let p_r = probe_power_sum_square(s, a);
    let denom = (a + d.big_gamma_sq) * (a + d.big_gamma_sq);
    let varrho0 = 2.0 * d.chi0 * d.big_gamma_sq / HBAR * p_r * a.sqrt() / denom;
    let kappa = alpha_norm
        .iter()
        .zip(plan.bands())
        .map(|(&an, b)| varrho0 * an.sqrt() * b.mu())
        .collect();
    Ok(TransferModel {
        p_r,
        varrho0,
        kappa,
        a_sum_square: a,
        alpha: alpha_norm,
    })
}

// ---------------------------------------------------------------------------
// Noise model
// ---------------------------------------------------------------------------

/// Per-band noise variances of the demodulated power signal: intrinsic
/// photon shot noise σ²_I = 𝒫ᵣBₙC₁ and extrinsic blackbody noise
/// σ²_E = κₙ²BₙC₂⁽ⁿ⁾, both in W².
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    c1: f64,
    c2: Vec<f64>,
    sigma2_intrinsic: Vec<f64>,
    sigma2_extrinsic: Vec<f64>,
}

impl NoiseModel {
    /// Photon-shot-noise coefficient C₁ = ħωₚ (J).
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Per-band blackbody coefficients C₂⁽ⁿ⁾ ((V/m)²/Hz).
    pub fn c2(&self) -> &[f64] {
        &self.c2
    }

    /// Intrinsic variances σ²_I,n = 𝒫ᵣBₙC₁ (W²).
    pub fn sigma2_intrinsic(&self) -> &[f64] {
        &self.sigma2_intrinsic
    }

    /// Extrinsic variances σ²_E,n = κₙ²BₙC₂⁽ⁿ⁾ (W²).
    pub fn sigma2_extrinsic(&self) -> &[f64] {
        &self.sigma2_extrinsic
    }

    /// Total variance σ²_I,n + σ²_E,n for band `n` (W²).
    pub fn sigma2_total(&self, n: usize) -> f64 {
        self.sigma2_intrinsic[n] + self.sigma2_extrinsic[n]
    }

    /// Number of bands.
    pub fn len(&self) -> usize {
        self.c2.len()
    }

    /// True when the model covers no bands (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.c2.is_empty()
    }
}

/// Blackbody field-noise coefficient
/// C₂ = 4ħfₙ³·coth(ħωₙ/2k_BT)/(ε₀c³) with fₙ = ωₙ/2π, in (V/m)²/Hz.
///
/// This is the one place the cubed-frequency prefactor is interpreted: the
/// ordinary frequency fₙ = ωₙ/2π enters the fₙ³ factor while the angular
/// frequency ωₙ sets the thermal occupation argument, which is the
/// dimensionally consistent reading of standard blackbody flux expressions.
/// Switching the prefactor to ωₙ³ would be a one-line change here.
/// coth(x/2) equals the population ratio (e^x+1)/(e^x−1) but stays finite
/// for large x instead of overflowing the intermediate exponentials.
pub fn blackbody_coefficient(omega_n: f64, temperature: f64) -> f64 {
    assert!(
        omega_n.is_finite() && omega_n > 0.0,
        "carrier frequency must be positive and finite, got {omega_n}"
    );
    assert!(
        temperature.is_finite() && temperature > 0.0,
        "temperature must be positive and finite, got {temperature}"
    );
    let f_n = omega_n / TWO_PI;
    let x = HBAR * omega_n / (KB * temperature);
    let coth_half = 1.0 / (0.5 * x).tanh();
    4.0 * HBAR * f_n.powi(3) * coth_half / (EPS0 * C_LIGHT.powi(3))
}

/// Evaluates the two-component noise model at an operating point given by
/// the DC bias `p_r` and gain factors `kappa` (one per planned band).
pub fn noise_variances(
    s: &AtomScenario,
    plan: &BandPlan,
    p_r: f64,
    kappa: &[f64],
) -> Result<NoiseModel, TransferError> {
    if kappa.len() != plan.len() {
        return Err(TransferError::BandCountMismatch {
            expected: plan.len(),
            got: kappa.len(),
            context: "noise model",
        });
    }
    assert!(
        p_r.is_finite() && p_r > 0.0,
        "DC bias must be positive and finite, got {p_r}"
    );
    let d = derive_constants(s);
    let temp = s.ambient_temp();
    let mut c2 = Vec::with_capacity(plan.len());
    let mut sigma2_intrinsic = Vec::with_capacity(plan.len());
    let mut sigma2_extrinsic = Vec::with_capacity(plan.len());
    for (b, &k) in plan.bands().iter().zip(kappa) {
        let c2_n = blackbody_coefficient(b.omega(), temp);
        c2.push(c2_n);
        sigma2_intrinsic.push(p_r * b.bandwidth() * d.c1);
        sigma2_extrinsic.push(k * k * b.bandwidth() * c2_n);
    }
    Ok(NoiseModel {
        c1: d.c1,
        c2,
        sigma2_intrinsic,
        sigma2_extrinsic,
    })
}

/// Per-band SNR for a data tone of field magnitude `e_s_mag` (V/m):
/// SNRₙ = κₙ²|E_s,n|²/(κₙ²BₙC₂⁽ⁿ⁾ + 𝒫ᵣBₙC₁).
///
/// The decoupled form αₙμₙ²|E_s,n|²/(αₙμₙ²BₙC₂⁽ⁿ⁾ + (𝒫ᵣ/ϱ₀²)BₙC₁) — the one
/// the attention optimizers are derived from — is evaluated alongside and
/// asserted equal to 1e-12 relative, so the decomposition can never drift
/// from the direct gain path.
pub fn snr(
    plan: &BandPlan,
    model: &TransferModel,
    noise: &NoiseModel,
    n: usize,
    e_s_mag: f64,
) -> f64 {
    assert!(n < plan.len(), "band index {n} out of range for {} bands", plan.len());
    assert_eq!(
        model.len(),
        plan.len(),
        "transfer model covers {} bands, plan has {}",
        model.len(),
        plan.len()
    );
    assert_eq!(
        noise.len(),
        plan.len(),
        "noise model covers {} bands, plan has {}",
        noise.len(),
        plan.len()
    );
    assert!(
        e_s_mag.is_finite() && e_s_mag >= 0.0,
        "field magnitude must be nonnegative and finite, got {e_s_mag}"
    );
    let b = &plan.bands()[n];
    let bw = b.bandwidth();
    let es_sq = e_s_mag * e_s_mag;

    let k = model.kappa()[n];
    let direct = k * k * es_sq / (k * k * bw * noise.c2()[n] + model.p_r() * bw * noise.c1());

    let an = model.alpha()[n];
    let mu_sq = b.mu() * b.mu();
    let decoupled = an * mu_sq * es_sq
        / (an * mu_sq * bw * noise.c2()[n]
            + model.p_r() / (model.varrho0() * model.varrho0()) * bw * noise.c1());

    let scale = direct.abs().max(decoupled.abs());
    assert!(
        (direct - decoupled).abs() <= 1e-12 * scale,
        "SNR forms disagree: direct {direct:e} vs decoupled {decoupled:e}"
    );
    direct
}

// ---------------------------------------------------------------------------
// Allocation-problem builders
// ---------------------------------------------------------------------------

/// Builds the spectral-efficiency allocation problem at an operating point:
/// γₙ = Bₙ/ΣBₘ, βₙ = |E_s,n|²/(BₙC₂⁽ⁿ⁾), εₙ = 𝒫ᵣC₁/(μₙ²ϱ₀²C₂⁽ⁿ⁾), with
/// |E_s,n|² the received field power of the plan's transmit powers and
/// channels.
pub fn se_problem_at(
    s: &AtomScenario,
    plan: &BandPlan,
    model: &TransferModel,
    noise: &NoiseModel,
) -> Result<SeAllocationProblem, TransferError> {
    check_band_counts(plan, model, noise, "SE allocation problem")?;
    let gamma = plan.bandwidth_weights();
    let mut beta = Vec::with_capacity(plan.len());
    let mut eps = Vec::with_capacity(plan.len());
    let bias_over_gain_sq = model.p_r() / (model.varrho0() * model.varrho0());
    for (b, &c2_n) in plan.bands().iter().zip(noise.c2()) {
        let es = received_field_amplitude(s, b);
        beta.push(es * es / (b.bandwidth() * c2_n));
        eps.push(bias_over_gain_sq * noise.c1() / (b.mu() * b.mu() * c2_n));
    }
    Ok(SeAllocationProblem::new(gamma, beta, eps)?)
}

/// Builds the sensing allocation problem at an operating point:
/// ξₙ = 3𝒫ᵣBₙC₁/(2π²μₙ²ϱ₀²|E_s,n|²) is the attention-scaled shot-noise term
/// of band n's normalized Cramér-Rao bound and
/// floorₙ = 3BₙC₂⁽ⁿ⁾/(2π²|E_s,n|²) its attention-independent blackbody
/// floor.
pub fn sense_problem_at(
    s: &AtomScenario,
    plan: &BandPlan,
    model: &TransferModel,
    noise: &NoiseModel,
) -> Result<SenseAllocationProblem, TransferError> {
    check_band_counts(plan, model, noise, "sensing allocation problem")?;
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let bias_over_gain_sq = model.p_r() / (model.varrho0() * model.varrho0());
    let mut xi = Vec::with_capacity(plan.len());
    let mut floor = Vec::with_capacity(plan.len());
    for (b, &c2_n) in plan.bands().iter().zip(noise.c2()) {
        let es = received_field_amplitude(s, b);
        let es_sq = es * es;
        xi.push(3.0 * bias_over_gain_sq * b.bandwidth() * noise.c1()
            / (two_pi_sq * b.mu() * b.mu() * es_sq));
        floor.push(3.0 * b.bandwidth() * c2_n / (two_pi_sq * es_sq));
    }
    Ok(SenseAllocationProblem::new(xi, floor)?)
}

fn check_band_counts(
    plan: &BandPlan,
    model: &TransferModel,
    noise: &NoiseModel,
    context: &'static str,
) -> Result<(), TransferError> {
    for got in [model.len(), noise.len()] {
        if got != plan.len() {
            return Err(TransferError::BandCountMismatch {
                expected: plan.len(),
                got,
                context,
            });
        }
    }
    Ok(())
}
