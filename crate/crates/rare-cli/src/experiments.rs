//! The five experiments behind the CLI verbs.
//!
//! * `waveforms` — synthesizes the probe-power record of an N-band drive
//!   along all three routes (linearized, quasi-static, master equation) and
//!   reports their relative RMS disagreement per N.
//! * `attention-sweep` — sweeps the two-band attention split α ∈ [0, 1] at
//!   the optimal Rabi sum-square, with optional Monte Carlo verification at
//!   strided grid points.
//! * `sumsquare-sweep` — sweeps the Rabi sum-square 𝒜 on a log grid around
//!   the optimum, comparing the optimal attention policy against a
//!   random-attention average.
//! * `power-sweep` — sweeps transmit power on all bands, comparing optimal
//!   attention, random attention, and an idealized classic receiver.
//! * `optimize` — prints the optimal operating point (sum-square, SE- and
//!   sensing-optimal attention, predicted metrics) without sweeping.
//!
//! Experiments parallelize over grid points; every output row is keyed by
//! grid index, so output ordering is independent of completion order and
//! re-runs are byte-identical.

use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use rare_core::constants::{HBAR, TWO_PI};
use rare_core::optimizer::{
    ncrlb, optimal_attention_se, optimal_attention_sensing, optimal_sum_square, optimal_x,
    se_objective, OptimizerError, SeAllocationProblem, SenseAllocationProblem,
};
use rare_core::pipeline::{
    classic_receiver_snr, derive_seed, generate_payload, run_trial, ClassicReceiverConfig,
    PipelineError, SeedPurpose, TrialMode,
};
use rare_core::quantum::QuantumError;
use rare_core::scenario::{
    default_scenario, load_scenario, scenario_to_string, AtomScenario, BandPlan, BandService,
    DerivedConstants, ScenarioError,
};
use rare_core::transfer::{
    gain_decomposition, noise_variances, received_field_amplitude, se_problem_at,
    sense_problem_at, snr, synthesize_waveform, BandSignal, SynthesisMode, TransferError,
    TransferModel,
};

use crate::config::{load_config, ConfigError, ExperimentConfig};
use crate::report::{csv_body, fmt_float, fnv1a64, write_artifact, ReportMeta, PLOT_STUB};

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

/// Process exit code for malformed inputs: unreadable or unparseable
/// scenario/config files, unknown keys, invalid grids, artifact I/O.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for physics preconditions: a scenario that parses but
/// fails validation, invalid operating points, allocation failures.
pub const EXIT_PHYSICS: i32 = 3;
/// Process exit code for numerical divergence in the quantum solvers.
pub const EXIT_DIVERGENCE: i32 = 4;

/// Everything an experiment can fail with.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    /// The experiment's own precondition failed (e.g. a sweep defined only
    /// for the dual-band layout).
    #[error("experiment precondition violated: {msg}")]
    Precondition { msg: String },
    /// An artifact could not be written.
    #[error("cannot write artifact `{path}`: {source}")]
    Artifact {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Maps the error to the documented process exit code: 2 for input
    /// problems, 3 for physics preconditions, 4 for numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Artifact { .. } => EXIT_CONFIG,
            CliError::Scenario(e) => match e {
                ScenarioError::Validation { .. } => EXIT_PHYSICS,
                _ => EXIT_CONFIG,
            },
            CliError::Quantum(q) => quantum_exit_code(q),
            CliError::Transfer(t) => transfer_exit_code(t),
            CliError::Optimizer(_) | CliError::Precondition { .. } => EXIT_PHYSICS,
            CliError::Pipeline(p) => match p {
                PipelineError::Transfer(t) => transfer_exit_code(t),
                _ => EXIT_PHYSICS,
            },
        }
    }
}

/// Divergence-class quantum failures get their own exit code; invariant
/// violations (non-Hermitian inputs, dimension mismatches) are physics
/// preconditions.
fn quantum_exit_code(q: &QuantumError) -> i32 {
    match q {
        QuantumError::Diverged { .. }
        | QuantumError::StepTooLarge { .. }
        | QuantumError::ResidualTooLarge { .. }
        | QuantumError::SingularSteadyState { .. } => EXIT_DIVERGENCE,
        _ => EXIT_PHYSICS,
    }
}

fn transfer_exit_code(t: &TransferError) -> i32 {
    match t {
        TransferError::Quantum(q) => quantum_exit_code(q),
        _ => EXIT_PHYSICS,
    }
}

// ---------------------------------------------------------------------------
// Run context
// ---------------------------------------------------------------------------

/// Everything an experiment needs: the validated scenario, its derived
/// constants, the experiment config, and the provenance fingerprints that
/// go into every artifact header.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub scenario: AtomScenario,
    pub plan: BandPlan,
    pub derived: DerivedConstants,
    pub config: ExperimentConfig,
    pub scenario_hash: u64,
    pub config_hash: u64,
}

impl RunContext {
    /// Validates the config and fingerprints both inputs.
    pub fn new(
        scenario: AtomScenario,
        plan: BandPlan,
        derived: DerivedConstants,
        config: ExperimentConfig,
    ) -> Result<Self, CliError> {
        config.validate()?;
        let scenario_hash = fnv1a64(scenario_to_string(&scenario, &plan).as_bytes());
        let config_hash = fnv1a64(config.fingerprint_text().as_bytes());
        Ok(RunContext {
            scenario,
            plan,
            derived,
            config,
            scenario_hash,
            config_hash,
        })
    }

    /// Loads scenario and config files (either may be omitted for the
    /// built-in defaults) and assembles the context.
    pub fn from_files(scenario: Option<&str>, config: Option<&str>) -> Result<Self, CliError> {
        let (s, plan, derived) = match scenario {
            Some(path) => load_scenario(path)?,
            None => default_scenario(),
        };
        let cfg = match config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        RunContext::new(s, plan, derived, cfg)
    }

    /// The optimal Rabi sum-square 𝒜★ of this scenario — the operating
    /// point every sweep is anchored to.
    pub fn a_star(&self) -> f64 {
        optimal_sum_square(self.derived.chi0, self.derived.big_gamma_sq)
    }

    fn meta(&self) -> ReportMeta {
        ReportMeta {
            scenario_hash: self.scenario_hash,
            config_hash: self.config_hash,
            master_seed: self.config.master_seed,
            mode: self.config.mode,
        }
    }

    /// Writes one CSV artifact into the configured output directory.
    fn write_csv(
        &self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let body = csv_body(&self.meta(), columns, rows);
        let dir = PathBuf::from(&self.config.out_dir);
        write_artifact(&dir, name, &body).map_err(|source| CliError::Artifact {
            path: dir.join(name).display().to_string(),
            source,
        })
    }

    /// Drops the generic plotting stub next to the CSVs when configured.
    fn maybe_plot_stub(&self, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
        if !self.config.plot_stub {
            return Ok(());
        }
        let dir = PathBuf::from(&self.config.out_dir);
        let path = write_artifact(&dir, "plot.py", PLOT_STUB).map_err(|source| {
            CliError::Artifact {
                path: dir.join("plot.py").display().to_string(),
                source,
            }
        })?;
        files.push(path);
        Ok(())
    }
}

/// What a finished experiment hands back: artifact paths plus a short
/// human-readable summary for stdout.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

// ---------------------------------------------------------------------------
// Shared numeric helpers
// ---------------------------------------------------------------------------

/// `n` evenly spaced values covering `[lo, hi]` (both endpoints exact);
/// `n = 1` degenerates to `[lo]`.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "grid needs at least one point");
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 / (n - 1) as f64))
        .collect()
}

/// `n` log-spaced values covering `center × 10^±decades`; for odd `n` the
/// middle point is exactly `center`, and `n = 1` degenerates to `[center]`.
fn logspace_around(center: f64, decades: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "grid needs at least one point");
    if n == 1 {
        return vec![center];
    }
    (0..n)
        .map(|i| center * 10f64.powf(decades * (2.0 * (i as f64 / (n - 1) as f64) - 1.0)))
        .collect()
}

/// Relative RMS deviation √(Σ(a−r)²/Σr²) of a trace against a reference.
fn rel_rms(trace: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(trace.len(), reference.len(), "traces must share a grid");
    let num: f64 = trace
        .iter()
        .zip(reference)
        .map(|(a, r)| (a - r) * (a - r))
        .sum();
    let den: f64 = reference.iter().map(|r| r * r).sum();
    (num / den).sqrt()
}

/// [`rel_rms`] after removing each trace's own mean — compares ripple
/// shapes with the DC offsets factored out.
fn rel_rms_ac(trace: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(trace.len(), reference.len(), "traces must share a grid");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mr) = (mean(trace), mean(reference));
    let a: Vec<f64> = trace.iter().map(|x| x - ma).collect();
    let r: Vec<f64> = reference.iter().map(|x| x - mr).collect();
    rel_rms(&a, &r)
}

/// One random attention vector. The dual-band draw gives band 1 a uniform
/// share in [0, 0.5) — the uncalibrated half of the simplex, so the random
/// policy never accidentally lands on the SE optimum; for other band counts
/// the draw is uniform over the whole simplex (exponential spacings).
fn random_attention(n_bands: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    assert!(n_bands >= 1, "attention needs at least one band");
    match n_bands {
        1 => vec![1.0],
        2 => {
            let a1 = rng.random_range(0.0..0.5);
            vec![a1, 1.0 - a1]
        }
        _ => {
            let gaps: Vec<f64> = (0..n_bands)
                .map(|_| {
                    let u: f64 = rng.random_range(0.0..1.0);
                    -(1.0 - u).ln()
                })
                .collect();
            let total: f64 = gaps.iter().sum();
            gaps.iter().map(|g| g / total).collect()
        }
    }
}

/// The paired random-attention draws shared by every grid point of a
/// sweep, so the "random policy" curve is a fixed average rather than
/// fresh noise per point.
fn attention_draws(ctx: &RunContext, n_bands: usize) -> Vec<Vec<f64>> {
    (0..ctx.config.random_alpha_draws)
        .map(|k| {
            let seed = derive_seed(ctx.config.master_seed, SeedPurpose::Attention, k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_attention(n_bands, &mut rng)
        })
        .collect()
}

/// Transfer model, noise model, and both allocation problems at a Rabi
/// sum-square 𝒜. The problems' coefficients depend only on 𝒜 (through the
/// DC bias and global gain), not on the attention used to build the model,
/// so one construction serves every α.
struct OperatingPoint {
    model: TransferModel,
    se: SeAllocationProblem,
    sense: SenseAllocationProblem,
}

fn operating_point(s: &AtomScenario, plan: &BandPlan, a: f64) -> Result<OperatingPoint, CliError> {
    let uniform = vec![1.0 / plan.len() as f64; plan.len()];
    let model = gain_decomposition(s, plan, a, &uniform)?;
    let noise = noise_variances(s, plan, model.p_r(), model.kappa())?;
    let se = se_problem_at(s, plan, &model, &noise)?;
    let sense = sense_problem_at(s, plan, &model, &noise)?;
    Ok(OperatingPoint { model, se, sense })
}

/// Mean per-band normalized Cramér-Rao bound at an attention split.
fn mean_ncrlb(alpha: &[f64], sense: &SenseAllocationProblem) -> f64 {
    let n = alpha.len();
    (0..n)
        .map(|i| ncrlb(alpha[i], sense.xi()[i], sense.floor()[i]))
        .sum::<f64>()
        / n as f64
}

/// Empty CSV cell (a metric that does not apply at this grid point).
fn blank() -> String {
    String::new()
}

// ---------------------------------------------------------------------------
// waveforms
// ---------------------------------------------------------------------------

/// Band counts exercised by the waveform experiment.
pub const WAVEFORM_BAND_COUNTS: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// Reference-tone Rabi frequency of every waveform-experiment band (rad/s).
pub const WAVEFORM_REF_RABI: f64 = TWO_PI * 1e6;
/// Upper edge of the uniform data-tone Rabi draw (rad/s).
pub const WAVEFORM_MAX_DATA_RABI: f64 = TWO_PI * 1e3;
/// Intermediate-frequency spacing between adjacent bands (rad/s).
pub const WAVEFORM_IF_STEP: f64 = TWO_PI * 100e3;

/// Synthesizes the N-band drive for the waveform experiment: every band
/// carries a 2π·1 MHz reference tone, a data tone drawn uniformly from
/// [0, 2π·1 kHz) in Rabi units with a uniform phase, and the IF ladder
/// δₙ = 2π·100n kHz. The per-N draw stream is derived from the master seed
/// so each N is reproducible in isolation.
fn waveform_signals(ctx: &RunContext, n_bands: usize) -> Result<Vec<BandSignal>, CliError> {
    let mu = ctx.plan.bands()[0].mu();
    let seed = derive_seed(ctx.config.master_seed, SeedPurpose::Payload, n_bands as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signals = Vec::with_capacity(n_bands);
    for n in 1..=n_bands {
        let omega_s = rng.random_range(0.0..WAVEFORM_MAX_DATA_RABI);
        let phase = rng.random_range(0.0..TWO_PI);
        let e_r = Complex::new(HBAR * WAVEFORM_REF_RABI / mu, 0.0);
        let e_s = Complex::from_polar(HBAR * omega_s / mu, phase);
        signals.push(BandSignal::new(e_r, e_s, WAVEFORM_IF_STEP * n as f64, mu)?);
    }
    Ok(signals)
}

/// Runs the three synthesis routes for N ∈ {1, 2, 4, 8, 16, 32} and writes
/// one trace file per N plus a summary of relative RMS deviations (the
/// master-equation trace is the reference).
pub fn cmd_waveforms(ctx: &RunContext) -> Result<ExperimentOutput, CliError> {
    let duration = ctx.config.waveform_duration_us * 1e-6;
    let rate = ctx.config.waveform_sample_rate_msps * 1e6;

    struct PerN {
        n_bands: usize,
        rows: Vec<Vec<String>>,
        dc_qs_rk4: f64,
        ac_qs_rk4: f64,
        dc_lin_rk4: f64,
        dc_lin_qs: f64,
    }

    let results: Vec<PerN> = WAVEFORM_BAND_COUNTS
        .par_iter()
        .map(|&n_bands| -> Result<PerN, CliError> {
            let signals = waveform_signals(ctx, n_bands)?;
            let lin =
                synthesize_waveform(&ctx.scenario, &signals, duration, rate, SynthesisMode::Linearized)?;
            let qs =
                synthesize_waveform(&ctx.scenario, &signals, duration, rate, SynthesisMode::QuasiStatic)?;
            let rk4 = synthesize_waveform(&ctx.scenario, &signals, duration, rate, SynthesisMode::Rk4)?;
            let rows = (0..rk4.len())
                .map(|i| {
                    vec![
                        fmt_float(rk4.time_at(i) * 1e6),
                        fmt_float(lin.samples()[i]),
                        fmt_float(qs.samples()[i]),
                        fmt_float(rk4.samples()[i]),
                    ]
                })
                .collect();
            Ok(PerN {
                n_bands,
                rows,
                dc_qs_rk4: rel_rms(qs.samples(), rk4.samples()),
                ac_qs_rk4: rel_rms_ac(qs.samples(), rk4.samples()),
                dc_lin_rk4: rel_rms(lin.samples(), rk4.samples()),
                dc_lin_qs: rel_rms(lin.samples(), qs.samples()),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut files = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "waveform routes over {} µs at {} MS/s (reference: master equation)",
        ctx.config.waveform_duration_us, ctx.config.waveform_sample_rate_msps
    );
    let mut summary_rows = Vec::new();
    for r in &results {
        files.push(ctx.write_csv(
            &format!("waveforms_n{}.csv", r.n_bands),
            &["t_us", "linearized_w", "quasistatic_w", "rk4_w"],
            &r.rows,
        )?);
        summary_rows.push(vec![
            r.n_bands.to_string(),
            fmt_float(r.dc_qs_rk4),
            fmt_float(r.ac_qs_rk4),
            fmt_float(r.dc_lin_rk4),
            fmt_float(r.dc_lin_qs),
        ]);
        let _ = writeln!(
            summary,
            "  N={:>2}: quasistatic-vs-rk4 {:.3}% (mean-removed {:.1}%), linearized-vs-rk4 {:.3}%",
            r.n_bands,
            100.0 * r.dc_qs_rk4,
            100.0 * r.ac_qs_rk4,
            100.0 * r.dc_lin_rk4,
        );
    }
    files.push(ctx.write_csv(
        "waveforms_summary.csv",
        &[
            "n_bands",
            "relrms_quasistatic_vs_rk4",
            "relrms_quasistatic_vs_rk4_ac",
            "relrms_linearized_vs_rk4",
            "relrms_linearized_vs_quasistatic",
        ],
        &summary_rows,
    )?);
    ctx.maybe_plot_stub(&mut files)?;
    Ok(ExperimentOutput { files, summary })
}

// ---------------------------------------------------------------------------
// attention-sweep
// ---------------------------------------------------------------------------

/// Sweeps the dual-band attention split α₁ ∈ [0, 1] (α₂ = 1 − α₁) at the
/// optimal sum-square. Analytic columns carry per-band SNR, SE, and NCRLB;
/// in Monte Carlo modes every `mc_stride`-th grid point is verified by a
/// seeded baseband trial (empirical SNR, symbol-error rate on communication
/// bands, normalized displacement MSE on sensing bands).
pub fn cmd_attention_sweep(ctx: &RunContext) -> Result<ExperimentOutput, CliError> {
    if ctx.plan.len() != 2 {
        return Err(CliError::Precondition {
            msg: format!(
                "the attention sweep is defined for the dual-band layout, got {} bands",
                ctx.plan.len()
            ),
        });
    }
    let a_star = ctx.a_star();
    let op = operating_point(&ctx.scenario, &ctx.plan, a_star)?;
    let weights = ctx.plan.bandwidth_weights();
    let points = ctx.config.attention_grid_points;
    let grid = linspace(0.0, 1.0, points);
    let mode = ctx.config.mode;

    let mut columns: Vec<&str> = vec!["alpha1"];
    if mode.wants_analytic() {
        columns.extend([
            "snr_1", "snr_2", "se_1", "se_2", "se_total", "ncrlb_1", "ncrlb_2",
        ]);
    }
    if mode.wants_monte_carlo() {
        columns.extend([
            "snr_mc_1", "snr_mc_2", "ser_mc_1", "ser_mc_2", "nmse_mc_1", "nmse_mc_2",
        ]);
    }

    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &a1)| -> Result<Vec<String>, CliError> {
            let alpha = [a1, 1.0 - a1];
            let mut row = vec![fmt_float(a1)];
            if mode.wants_analytic() {
                let model = gain_decomposition(&ctx.scenario, &ctx.plan, a_star, &alpha)?;
                let noise = noise_variances(&ctx.scenario, &ctx.plan, model.p_r(), model.kappa())?;
                let mut se = [0.0; 2];
                let mut snrs = [0.0; 2];
                let mut bounds = [0.0; 2];
                for n in 0..2 {
                    let e_s = received_field_amplitude(&ctx.scenario, &ctx.plan.bands()[n]);
                    snrs[n] = snr(&ctx.plan, &model, &noise, n, e_s);
                    se[n] = weights[n] * (1.0 + snrs[n]).log2();
                    bounds[n] = ncrlb(alpha[n], op.sense.xi()[n], op.sense.floor()[n]);
                }
                row.extend([
                    fmt_float(snrs[0]),
                    fmt_float(snrs[1]),
                    fmt_float(se[0]),
                    fmt_float(se[1]),
                    fmt_float(se[0] + se[1]),
                    fmt_float(bounds[0]),
                    fmt_float(bounds[1]),
                ]);
            }
            if mode.wants_monte_carlo() {
                if i % ctx.config.mc_stride == 0 {
                    let seed = derive_seed(ctx.config.master_seed, SeedPurpose::Attention, i as u64);
                    let payload = generate_payload(&ctx.plan, ctx.config.mc_symbols, seed)?;
                    let report = run_trial(
                        &ctx.scenario,
                        &ctx.plan,
                        &alpha,
                        a_star,
                        &payload,
                        seed,
                        TrialMode::Baseband,
                    )?;
                    let opt_cell = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
                    row.extend([
                        fmt_float(report.bands[0].snr_empirical),
                        fmt_float(report.bands[1].snr_empirical),
                        opt_cell(report.bands[0].ser),
                        opt_cell(report.bands[1].ser),
                        opt_cell(report.bands[0].displacement_nmse),
                        opt_cell(report.bands[1].displacement_nmse),
                    ]);
                } else {
                    row.extend([blank(), blank(), blank(), blank(), blank(), blank()]);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut files = vec![ctx.write_csv("attention_sweep.csv", &columns, &rows)?];
    ctx.maybe_plot_stub(&mut files)?;

    // Endpoint summary: the single-band operating point and what moving to
    // the even split costs band 1.
    let mut summary = String::new();
    let se_at = |alpha: &[f64]| -> Result<[f64; 2], CliError> {
        let model = gain_decomposition(&ctx.scenario, &ctx.plan, a_star, alpha)?;
        let noise = noise_variances(&ctx.scenario, &ctx.plan, model.p_r(), model.kappa())?;
        let mut out = [0.0; 2];
        for n in 0..2 {
            let e_s = received_field_amplitude(&ctx.scenario, &ctx.plan.bands()[n]);
            out[n] = weights[n] * (1.0 + snr(&ctx.plan, &model, &noise, n, e_s)).log2();
        }
        Ok(out)
    };
    let se_full = se_at(&[1.0, 0.0])?;
    let se_half = se_at(&[0.5, 0.5])?;
    let ncrlb_full_db = 10.0 * ncrlb(1.0, op.sense.xi()[0], op.sense.floor()[0]).log10();
    let ncrlb_half_db = 10.0 * ncrlb(0.5, op.sense.xi()[0], op.sense.floor()[0]).log10();
    let _ = writeln!(
        summary,
        "attention sweep: {points} points at the optimal sum-square (sqrt = {:.4} MHz x 2pi)",
        a_star.sqrt() / TWO_PI / 1e6
    );
    let _ = writeln!(
        summary,
        "  band 1 at alpha = 1: SE {:.3} bps/Hz, NCRLB {:.2} dB",
        se_full[0], ncrlb_full_db
    );
    let _ = writeln!(
        summary,
        "  alpha 1 -> 0.5 deltas: SE {:+.4} bps/Hz, NCRLB {:+.3} dB",
        se_half[0] - se_full[0],
        ncrlb_half_db - ncrlb_full_db
    );
    let _ = writeln!(
        summary,
        "  calibration note: the field-conversion constant ({} (V/m)/sqrt(W)) is chosen so the\n  alpha = 1 endpoint lands on the reference anchors; the half-split deltas are set by the\n  shot-to-blackbody noise ratio, which no conversion constant can move.",
        ctx.scenario.kappa_field()
    );
    Ok(ExperimentOutput { files, summary })
}

// ---------------------------------------------------------------------------
// sumsquare-sweep
// ---------------------------------------------------------------------------

/// Sweeps the Rabi sum-square over a log grid around the optimum and
/// reports the SE and mean-NCRLB of the optimal-attention policy against a
/// fixed random-attention average at every point.
pub fn cmd_sumsquare_sweep(ctx: &RunContext) -> Result<ExperimentOutput, CliError> {
    let a_star = ctx.a_star();
    let grid = logspace_around(
        a_star,
        ctx.config.sumsquare_span_decades,
        ctx.config.sumsquare_grid_points,
    );
    let draws = attention_draws(ctx, ctx.plan.len());

    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&a| -> Result<Vec<String>, CliError> {
            let op = operating_point(&ctx.scenario, &ctx.plan, a)?;
            let best = optimal_attention_se(&op.se)?;
            let se_opt = se_objective(&best.alpha, &op.se);
            let se_rand = draws
                .iter()
                .map(|alpha| se_objective(alpha, &op.se))
                .sum::<f64>()
                / draws.len() as f64;
            let alpha_sense = optimal_attention_sensing(&op.sense);
            let ncrlb_opt = mean_ncrlb(&alpha_sense, &op.sense);
            let ncrlb_rand = draws
                .iter()
                .map(|alpha| mean_ncrlb(alpha, &op.sense))
                .sum::<f64>()
                / draws.len() as f64;
            Ok(vec![
                fmt_float(a),
                fmt_float(a.sqrt() / TWO_PI / 1e6),
                fmt_float(se_opt),
                fmt_float(se_rand),
                fmt_float(ncrlb_opt),
                fmt_float(ncrlb_rand),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let columns = [
        "sumsquare_rad2_per_s2",
        "sqrt_sumsquare_mhz_over_2pi",
        "se_optimal",
        "se_random_mean",
        "ncrlb_optimal_mean",
        "ncrlb_random_mean",
    ];
    let mut files = vec![ctx.write_csv("sumsquare_sweep.csv", &columns, &rows)?];
    ctx.maybe_plot_stub(&mut files)?;

    let best_se_idx = argmax(rows.iter().map(|r| cell_f64(&r[2])));
    let best_ncrlb_idx = argmin(rows.iter().map(|r| cell_f64(&r[4])));
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "sum-square sweep: {} log points over ±{} decades around the optimum ({} random-attention draws)",
        grid.len(),
        ctx.config.sumsquare_span_decades,
        draws.len()
    );
    let _ = writeln!(
        summary,
        "  SE peak at grid index {best_se_idx} (sqrt = {:.4} MHz x 2pi); NCRLB trough at index {best_ncrlb_idx} (sqrt = {:.4} MHz x 2pi)",
        grid[best_se_idx].sqrt() / TWO_PI / 1e6,
        grid[best_ncrlb_idx].sqrt() / TWO_PI / 1e6
    );
    Ok(ExperimentOutput { files, summary })
}

// ---------------------------------------------------------------------------
// power-sweep
// ---------------------------------------------------------------------------

/// Sweeps the transmit power applied to every band and reports SE and mean
/// NCRLB for three policies: optimal attention, random-attention average,
/// and an idealized classic receiver (antenna + LNA, thermal-noise-limited;
/// approximate — real front-end losses are not modeled).
pub fn cmd_power_sweep(ctx: &RunContext) -> Result<ExperimentOutput, CliError> {
    let a_star = ctx.a_star();
    let grid = linspace(
        ctx.config.power_min_dbm,
        ctx.config.power_max_dbm,
        ctx.config.power_grid_points,
    );
    let draws = attention_draws(ctx, ctx.plan.len());
    let weights = ctx.plan.bandwidth_weights();
    let classic_cfg = ClassicReceiverConfig::default();

    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&pt_dbm| -> Result<Vec<String>, CliError> {
            let mut bands = ctx.plan.bands().to_vec();
            for b in &mut bands {
                b.transmit_power_dbm = pt_dbm;
            }
            let plan = BandPlan::new(bands)?;
            let op = operating_point(&ctx.scenario, &plan, a_star)?;
            let best = optimal_attention_se(&op.se)?;
            let se_opt = se_objective(&best.alpha, &op.se);
            let se_rand = draws
                .iter()
                .map(|alpha| se_objective(alpha, &op.se))
                .sum::<f64>()
                / draws.len() as f64;
            let alpha_sense = optimal_attention_sensing(&op.sense);
            let ncrlb_opt = mean_ncrlb(&alpha_sense, &op.sense);
            let ncrlb_rand = draws
                .iter()
                .map(|alpha| mean_ncrlb(alpha, &op.sense))
                .sum::<f64>()
                / draws.len() as f64;
            let mut se_classic = 0.0;
            let mut ncrlb_classic = 0.0;
            for (n, band) in plan.bands().iter().enumerate() {
                let s = classic_receiver_snr(band, &classic_cfg);
                se_classic += weights[n] * (1.0 + s).log2();
                ncrlb_classic += 3.0 / (2.0 * std::f64::consts::PI.powi(2) * s);
            }
            ncrlb_classic /= plan.len() as f64;
            Ok(vec![
                fmt_float(pt_dbm),
                fmt_float(se_opt),
                fmt_float(se_rand),
                fmt_float(se_classic),
                fmt_float(ncrlb_opt),
                fmt_float(ncrlb_rand),
                fmt_float(ncrlb_classic),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let columns = [
        "pt_dbm",
        "se_optimal",
        "se_random_mean",
        "se_classic_approx",
        "ncrlb_optimal_mean",
        "ncrlb_random_mean",
        "ncrlb_classic_approx",
    ];
    let mut files = vec![ctx.write_csv("power_sweep.csv", &columns, &rows)?];
    ctx.maybe_plot_stub(&mut files)?;

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "power sweep: {} points over [{}, {}] dBm on all bands ({} random-attention draws)",
        grid.len(),
        ctx.config.power_min_dbm,
        ctx.config.power_max_dbm,
        draws.len()
    );
    let _ = writeln!(
        summary,
        "  classic-receiver columns are approximate: an idealized antenna + LNA budget with no\n  front-end losses, thermal-noise-limited."
    );
    Ok(ExperimentOutput { files, summary })
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

/// Computes and reports the optimal operating point without sweeping: the
/// optimal Rabi sum-square, the SE-optimal and sensing-optimal attention
/// vectors for the configured service mix, and the metrics each predicts.
pub fn cmd_optimize(ctx: &RunContext) -> Result<ExperimentOutput, CliError> {
    let a_star = ctx.a_star();
    let x_star = optimal_x(ctx.derived.chi0);
    let op = operating_point(&ctx.scenario, &ctx.plan, a_star)?;
    let best = optimal_attention_se(&op.se)?;
    let se_total = se_objective(&best.alpha, &op.se);
    let alpha_sense = optimal_attention_sensing(&op.sense);
    let ncrlb_mean = mean_ncrlb(&alpha_sense, &op.sense);
    let weights = ctx.plan.bandwidth_weights();

    // Per-band SE contributions at the SE-optimal attention.
    let model = gain_decomposition(&ctx.scenario, &ctx.plan, a_star, &best.alpha)?;
    let noise = noise_variances(&ctx.scenario, &ctx.plan, model.p_r(), model.kappa())?;
    let mut rows: Vec<Vec<String>> = vec![
        vec!["sumsquare_optimal_rad2_per_s2".into(), fmt_float(a_star)],
        vec![
            "sqrt_sumsquare_optimal_mhz_over_2pi".into(),
            fmt_float(a_star.sqrt() / TWO_PI / 1e6),
        ],
        vec!["saturation_fraction_optimal".into(), fmt_float(x_star)],
        vec!["dc_bias_w".into(), fmt_float(op.model.p_r())],
        vec!["global_gain".into(), fmt_float(op.model.varrho0())],
        vec!["nu_star".into(), fmt_float(best.nu)],
        vec!["se_total_bps_hz".into(), fmt_float(se_total)],
        vec!["ncrlb_mean_at_sense_optimal".into(), fmt_float(ncrlb_mean)],
    ];
    let mut summary = String::new();
    let _ = writeln!(summary, "optimal operating point ({} bands)", ctx.plan.len());
    let _ = writeln!(
        summary,
        "  Rabi sum-square: {:.6e} (rad/s)^2, sqrt = {:.4} MHz x 2pi (saturation fraction {:.5})",
        a_star,
        a_star.sqrt() / TWO_PI / 1e6,
        x_star
    );
    let _ = writeln!(
        summary,
        "  SE-optimal attention (multiplier {:.6e}, {} bisection iterations): SE {:.3} bps/Hz",
        best.nu, best.iterations, se_total
    );
    let _ = writeln!(
        summary,
        "  sensing-optimal attention: mean NCRLB {:.4e} ({:.2} dB)",
        ncrlb_mean,
        10.0 * ncrlb_mean.log10()
    );
    for (n, band) in ctx.plan.bands().iter().enumerate() {
        let tag = n + 1;
        let e_s = received_field_amplitude(&ctx.scenario, band);
        let snr_n = snr(&ctx.plan, &model, &noise, n, e_s);
        let se_n = weights[n] * (1.0 + snr_n).log2();
        let ncrlb_n = ncrlb(alpha_sense[n], op.sense.xi()[n], op.sense.floor()[n]);
        let service = match band.service {
            BandService::Comm { order } => format!("comm{order}"),
            BandService::Sense => "sense".to_string(),
        };
        rows.push(vec![format!("band.{tag}.service"), service.clone()]);
        rows.push(vec![format!("band.{tag}.alpha_se"), fmt_float(best.alpha[n])]);
        rows.push(vec![format!("band.{tag}.se_bps_hz"), fmt_float(se_n)]);
        rows.push(vec![format!("band.{tag}.alpha_sense"), fmt_float(alpha_sense[n])]);
        rows.push(vec![
            format!("band.{tag}.ncrlb_at_alpha_sense"),
            fmt_float(ncrlb_n),
        ]);
        let _ = writeln!(
            summary,
            "  band {tag} ({service}): alpha_se {:.6}, SE {:.3} bps/Hz; alpha_sense {:.6}, NCRLB {:.2} dB",
            best.alpha[n],
            se_n,
            alpha_sense[n],
            10.0 * ncrlb_n.log10()
        );
    }
    let _ = writeln!(
        summary,
        "  both objectives are reported for every band; pick the column matching each band's service."
    );

    let mut files = vec![ctx.write_csv("optimize.csv", &["quantity", "value"], &rows)?];
    ctx.maybe_plot_stub(&mut files)?;
    Ok(ExperimentOutput { files, summary })
}

// ---------------------------------------------------------------------------
// Small grid utilities
// ---------------------------------------------------------------------------

fn cell_f64(cell: &str) -> f64 {
    cell.parse().expect("numeric CSV cell")
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rare_core::scenario::scenario_from_str;

    fn test_context(config: ExperimentConfig) -> RunContext {
        let (s, plan, derived) = default_scenario();
        RunContext::new(s, plan, derived, config).expect("default context must build")
    }

    fn tmp_config(dir: &tempfile::TempDir) -> ExperimentConfig {
        ExperimentConfig {
            out_dir: dir.path().display().to_string(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        let config = CliError::Config(ConfigError::Validation {
            msg: "x".into(),
        });
        assert_eq!(config.exit_code(), EXIT_CONFIG, "config error -> 2");
        let parse = CliError::Scenario(ScenarioError::MissingKey { key: "k".into() });
        assert_eq!(parse.exit_code(), EXIT_CONFIG, "scenario parse error -> 2");
        let physics = CliError::Scenario(ScenarioError::Validation { msg: "x".into() });
        assert_eq!(physics.exit_code(), EXIT_PHYSICS, "scenario validation -> 3");
        let precondition = CliError::Precondition { msg: "x".into() };
        assert_eq!(precondition.exit_code(), EXIT_PHYSICS, "precondition -> 3");
        let diverged = CliError::Quantum(QuantumError::Diverged { t: 0.0, max_abs: 11.0 });
        assert_eq!(diverged.exit_code(), EXIT_DIVERGENCE, "divergence -> 4");
        let nested = CliError::Pipeline(PipelineError::Transfer(TransferError::Quantum(
            QuantumError::StepTooLarge { dt: 1.0, dt_max: 0.5, t: 0.0 },
        )));
        assert_eq!(nested.exit_code(), EXIT_DIVERGENCE, "nested divergence -> 4");
        let undersampled = CliError::Transfer(TransferError::Undersampled {
            sample_rate: 1.0,
            required: 2.0,
        });
        assert_eq!(undersampled.exit_code(), EXIT_PHYSICS, "physics precondition -> 3");
    }

    #[test]
    fn grids_hit_both_endpoints_exactly() {
        let lin = linspace(0.0, 20.0, 11);
        assert_eq!(lin.len(), 11, "requested points");
        assert_eq!(lin[0], 0.0, "low endpoint exact");
        assert_eq!(lin[10], 20.0, "high endpoint exact");
        assert_eq!(linspace(5.0, 9.0, 1), vec![5.0], "one-point grid degenerates to lo");
        let log = logspace_around(100.0, 2.0, 5);
        assert!((log[0] - 1.0).abs() < 1e-12, "low decade endpoint, got {}", log[0]);
        assert_eq!(log[2], 100.0, "odd grid centers exactly");
        assert!((log[4] - 1e4).abs() < 1e-8, "high decade endpoint, got {}", log[4]);
        assert_eq!(logspace_around(7.0, 3.0, 1), vec![7.0], "one-point log grid is the center");
    }

    #[test]
    fn rel_rms_measures_what_it_says() {
        let reference = [3.0, 4.0];
        assert_eq!(rel_rms(&reference, &reference), 0.0, "identical traces");
        let shifted = [3.5, 4.5];
        let expected = (0.5f64 / 25.0).sqrt();
        assert!(
            (rel_rms(&shifted, &reference) - expected).abs() < 1e-15,
            "hand-computed DC-inclusive value"
        );
        assert!(
            rel_rms_ac(&shifted, &reference) < 1e-15,
            "a pure offset vanishes under the mean-removed metric"
        );
    }

    #[test]
    fn random_attention_lives_on_the_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(random_attention(1, &mut rng), vec![1.0], "single band gets everything");
        for n in [2usize, 3, 5] {
            for _ in 0..200 {
                let alpha = random_attention(n, &mut rng);
                assert_eq!(alpha.len(), n, "one entry per band");
                let sum: f64 = alpha.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "sums to one, got {sum}");
                assert!(alpha.iter().all(|&a| (0.0..=1.0).contains(&a)), "entries in [0,1]");
                if n == 2 {
                    assert!(alpha[0] < 0.5, "dual-band draw keeps band 1 under the even split");
                }
            }
        }
    }

    #[test]
    fn attention_sweep_requires_two_bands() {
        let single = "\
n_bands = 1
band.1.carrier_ghz_over_2pi = 3.212
band.1.if_khz_over_2pi = 100
band.1.bandwidth_khz = 80
band.1.dipole_qa0 = 2410
band.1.channel_gain_db = -90
band.1.transmit_power_dbm = 20
";
        let (s, plan, derived) = scenario_from_str(single).expect("single-band scenario parses");
        let dir = tempfile::tempdir().expect("tempdir");
        let ctx = RunContext::new(s, plan, derived, tmp_config(&dir)).expect("context builds");
        let err = cmd_attention_sweep(&ctx).expect_err("single-band sweep must be refused");
        assert!(
            matches!(err, CliError::Precondition { .. }),
            "want precondition error, got {err:?}"
        );
        assert_eq!(err.exit_code(), EXIT_PHYSICS, "precondition maps to exit 3");
    }

    #[test]
    fn optimize_reports_the_known_operating_point() {
        let dir = tempfile::tempdir().expect("tempdir");
        let ctx = test_context(tmp_config(&dir));
        let out = cmd_optimize(&ctx).expect("optimize must succeed on defaults");
        assert!(
            out.summary.contains("0.5859") || out.summary.contains("0.586"),
            "summary must show the optimal sum-square in MHz, got:\n{}",
            out.summary
        );
        let text = std::fs::read_to_string(&out.files[0]).expect("optimize.csv readable");
        assert!(
            text.contains("sqrt_sumsquare_optimal_mhz_over_2pi"),
            "CSV carries the headline quantity"
        );
        assert!(
            text.lines().next().expect("nonempty").starts_with("# tool = rare "),
            "artifact header starts with the tool version"
        );
    }

    #[test]
    fn single_band_optimize_puts_all_attention_on_the_band() {
        let single = "\
n_bands = 1
band.1.carrier_ghz_over_2pi = 3.212
band.1.if_khz_over_2pi = 100
band.1.bandwidth_khz = 80
band.1.dipole_qa0 = 2410
band.1.channel_gain_db = -90
band.1.transmit_power_dbm = 20
";
        let (s, plan, derived) = scenario_from_str(single).expect("single-band scenario parses");
        let dir = tempfile::tempdir().expect("tempdir");
        let ctx = RunContext::new(s, plan, derived, tmp_config(&dir)).expect("context builds");
        let out = cmd_optimize(&ctx).expect("single-band optimize succeeds");
        let text = std::fs::read_to_string(&out.files[0]).expect("CSV readable");
        let alpha_se: f64 = text
            .lines()
            .find(|l| l.starts_with("band.1.alpha_se,"))
            .and_then(|l| l.split(',').nth(1))
            .expect("alpha_se row present")
            .parse()
            .expect("alpha parses");
        assert!(
            (alpha_se - 1.0).abs() < 1e-9,
            "single band takes all attention, got {alpha_se}"
        );
        let alpha_sense: f64 = text
            .lines()
            .find(|l| l.starts_with("band.1.alpha_sense,"))
            .and_then(|l| l.split(',').nth(1))
            .expect("alpha_sense row present")
            .parse()
            .expect("alpha parses");
        assert_eq!(alpha_sense, 1.0, "sensing split of one band is exact");
    }

    #[test]
    fn attention_sweep_rows_are_deterministic_and_ordered() {
        let dir_a = tempfile::tempdir().expect("tempdir");
        let dir_b = tempfile::tempdir().expect("tempdir");
        let cfg = ExperimentConfig {
            attention_grid_points: 11,
            mc_symbols: 50,
            mc_stride: 5,
            ..ExperimentConfig::default()
        };
        let cfg_a = ExperimentConfig {
            out_dir: dir_a.path().display().to_string(),
            ..cfg.clone()
        };
        let cfg_b = ExperimentConfig {
            out_dir: dir_b.path().display().to_string(),
            ..cfg
        };

        let out_a = cmd_attention_sweep(&test_context(cfg_a)).expect("sweep a");
        let out_b = cmd_attention_sweep(&test_context(cfg_b)).expect("sweep b");
        let text_a = std::fs::read_to_string(&out_a.files[0]).expect("csv a");
        let text_b = std::fs::read_to_string(&out_b.files[0]).expect("csv b");
        assert_eq!(text_a, text_b, "same inputs must give byte-identical bodies");

        let first_data = text_a
            .lines()
            .nth(6)
            .expect("header block, columns, then first row");
        assert!(
            first_data.starts_with("0e0,"),
            "rows ordered by grid index (alpha1 = 0 first), got `{first_data}`"
        );
        let alphas: Vec<f64> = text_a
            .lines()
            .skip(6)
            .map(|l| l.split(',').next().expect("alpha cell").parse().expect("parses"))
            .collect();
        assert_eq!(alphas.len(), 11, "one row per grid point");
        assert!(
            alphas.windows(2).all(|w| w[0] < w[1]),
            "alpha column strictly increasing regardless of which worker finished first"
        );
        assert_eq!(*alphas.last().expect("nonempty"), 1.0, "endpoint row present");
    }

    #[test]
    fn power_sweep_applies_power_to_all_bands_and_orders_policies() {
        let dir = tempfile::tempdir().expect("tempdir");
        let cfg = ExperimentConfig {
            power_grid_points: 5,
            random_alpha_draws: 8,
            ..tmp_config(&dir)
        };
        let ctx = test_context(cfg);
        let out = cmd_power_sweep(&ctx).expect("power sweep succeeds");
        let text = std::fs::read_to_string(&out.files[0]).expect("csv readable");
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(6)
            .map(|l| l.split(',').map(|c| c.parse().expect("numeric")).collect())
            .collect();
        assert_eq!(rows.len(), 5, "one row per power point");
        for w in rows.windows(2) {
            assert!(
                w[1][1] >= w[0][1] && w[1][2] >= w[0][2] && w[1][3] >= w[0][3],
                "every SE policy is nondecreasing in transmit power"
            );
        }
        for r in &rows {
            assert!(
                r[1] >= r[2],
                "optimal-attention SE must dominate the random average ({} < {})",
                r[1],
                r[2]
            );
            assert!(
                r[4] <= r[5],
                "optimal-attention NCRLB must dominate the random average"
            );
        }
    }
}
