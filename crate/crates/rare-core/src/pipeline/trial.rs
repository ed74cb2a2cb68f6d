//! Deterministic Monte Carlo trials over the full receive chain, and the
//! conventional-receiver baseline they are measured against.
//!
//! A trial takes a scenario, a band plan, an operating point (𝒜, α), and a
//! payload, and pushes every payload entry through modulation → (optionally
//! waveform synthesis and demodulation) → measurement noise → detection or
//! estimation. The report puts empirical error rates next to the analytic
//! figures computed from the same signal-to-noise ratios, so theory and
//! measurement can be compared column by column.

use num_complex::Complex;

use crate::constants::{C_LIGHT, HBAR, KB};
use crate::scenario::{AtomScenario, Band, BandPlan, BandService};
use crate::transfer::{
    gain_decomposition, noise_variances, received_field_amplitude, snr, synthesize_waveform,
    BandSignal, SynthesisMode,
};

use super::constellation::ml_detect_symbol;
use super::demod::{demodulate_bands, add_noise, FIR_TAPS};
use super::payload::{
    circular_displacement_error, displacement_prior_variance, ml_estimate_displacement,
    BandPayload, Payload,
};
use super::{derive_seed, PipelineError, SeedPurpose};

// ---------------------------------------------------------------------------
// Conventional-receiver baseline
// ---------------------------------------------------------------------------

/// Front-end parameters of the conventional antenna + low-noise-amplifier
/// baseline. This is an approximate textbook link budget — an ideal
/// matched antenna, a single-stage amplifier, no feed or mismatch losses —
/// kept simple on purpose so the atomic receiver is compared against a
/// clearly stated reference, not a tuned competitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicReceiverConfig {
    /// Antenna gain over isotropic (dB); default 2.1 dB, a half-wave dipole.
    pub antenna_gain_db: f64,
    /// Low-noise-amplifier gain (dB); default 30 dB.
    pub lna_gain_db: f64,
    /// Low-noise-amplifier noise temperature (K); default 100 K.
    pub lna_noise_temperature_k: f64,
    /// Antenna ambient temperature (K); default 290 K.
    pub ambient_temperature_k: f64,
}

impl Default for ClassicReceiverConfig {
    fn default() -> Self {
        ClassicReceiverConfig {
            antenna_gain_db: 2.1,
            lna_gain_db: 30.0,
            lna_noise_temperature_k: 100.0,
            ambient_temperature_k: 290.0,
        }
    }
}

/// Per-band SNR of the conventional baseline:
/// G_ant·|hₙ|²·P_t,n·G_lna / (k_B·(T_a + T_lna)·Bₙ·G_lna).
///
/// The amplifier gain multiplies signal and noise alike and cancels
/// exactly; it stays in the expression so the formula reads like the link
/// budget it abbreviates and every config field participates.
pub fn classic_receiver_snr(band: &Band, config: &ClassicReceiverConfig) -> f64 {
    for (what, v) in [
        ("antenna gain", config.antenna_gain_db),
        ("LNA gain", config.lna_gain_db),
    ] {
        assert!(v.is_finite(), "{what} must be finite, got {v} dB");
    }
    for (what, v) in [
        ("LNA noise temperature", config.lna_noise_temperature_k),
        ("ambient temperature", config.ambient_temperature_k),
    ] {
        assert!(v.is_finite() && v >= 0.0, "{what} must be nonnegative and finite, got {v} K");
    }
    let g_ant = 10f64.powf(config.antenna_gain_db / 10.0);
    let g_lna = 10f64.powf(config.lna_gain_db / 10.0);
    let noise_temp = config.ambient_temperature_k + config.lna_noise_temperature_k;
    assert!(noise_temp > 0.0, "total noise temperature must be positive, got {noise_temp} K");
    g_ant * band.channel_gain_sq() * band.pt() * g_lna
        / (KB * noise_temp * band.bandwidth() * g_lna)
}

// ---------------------------------------------------------------------------
// Trial driver
// ---------------------------------------------------------------------------

/// How trial observations are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialMode {
    /// Jump straight to the demodulated amplitudes yₙ = κₙ·E_s,n. Fast;
    /// exercises the gain/noise model but not the waveform path.
    Baseband,
    /// Synthesize the quasi-static probe-power waveform for every payload
    /// entry (one symbol per coherence window) and demodulate it at the
    /// given sample rate, then add the same baseband noise.
    Waveform {
        /// Waveform sample rate (S/s); 16 MS/s in the experiments.
        sample_rate: f64,
    },
}

/// One band's results: analytic figures and the empirical outcomes of the
/// payload run. Communication bands fill `ser`; sensing bands fill the
/// displacement fields; a band with zero end-to-end gain (zero attention,
/// dead channel, or zero transmit power) is unobservable and leaves the
/// empirical fields `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    /// 1-based band number, matching the plan order.
    pub band: usize,
    /// Analytic SNR at this operating point.
    pub snr_analytic: f64,
    /// Mean clean signal power over the payload divided by the noise
    /// variance; compare against `snr_analytic`.
    pub snr_empirical: f64,
    /// Spectral-efficiency contribution γₙ·log₂(1 + SNRₙ) (bits/s/Hz).
    pub se_contribution: f64,
    /// Normalized Cramér-Rao bound 3/(2π²·SNRₙ) on displacement estimation;
    /// +∞ when the band is unobservable.
    pub ncrlb: f64,
    /// Empirical symbol-error rate (communication bands).
    pub ser: Option<f64>,
    /// Empirical mean squared displacement error (m², sensing bands).
    pub displacement_mse: Option<f64>,
    /// `displacement_mse` divided by the prior displacement power
    /// π²c²/(3ωₙ²); compare against `ncrlb`.
    pub displacement_nmse: Option<f64>,
}

/// Results of one deterministic trial run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    /// Per-band results in plan order.
    pub bands: Vec<BandReport>,
    /// Payload entries pushed through the chain per band.
    pub count: usize,
    /// The master seed all random streams derived from.
    pub master_seed: u64,
    /// How observations were produced.
    pub mode: TrialMode,
}

/// Runs a payload through the receive chain at the operating point
/// (`sum_square`, `alpha`) and reports empirical and analytic figures side
/// by side.
///
/// All randomness comes from streams derived from `seed`: payload content
/// is fixed by the caller, and the measurement noise of band n, trial k
/// reads the stream [`SeedPurpose::Noise`] with index n·2³² + k. Reports
/// are therefore bit-for-bit reproducible for equal inputs, regardless of
/// evaluation order.
pub fn run_trial(
    s: &AtomScenario,
    plan: &BandPlan,
    alpha: &[f64],
    sum_square: f64,
    payload: &Payload,
    seed: u64,
    mode: TrialMode,
) -> Result<TrialReport, PipelineError> {
    let model = gain_decomposition(s, plan, sum_square, alpha)?;
    let noise = noise_variances(s, plan, model.p_r(), model.kappa())?;
    check_payload_shape(plan, payload)?;
    let count = payload.count();
    let weights = plan.bandwidth_weights();
    let field_conversion = s.kappa_field();

    // Clean demodulated amplitudes y_clean[n][k], before measurement noise.
    let y_clean: Vec<Vec<Complex<f64>>> = match mode {
        TrialMode::Baseband => plan
            .bands()
            .iter()
            .enumerate()
            .map(|(n, band)| {
                let gain = model.kappa()[n] * field_conversion * band.pt().sqrt() * band.channel();
                (0..count)
                    .map(|k| gain * modulator(&payload.bands()[n], band, k))
                    .collect()
            })
            .collect(),
        TrialMode::Waveform { sample_rate } => {
            // Window: the filter length plus the longest band's symbol
            // period, so every band keeps at least one symbol period of
            // fully-overlapped filter output to average.
            let longest_period = plan
                .bands()
                .iter()
                .map(|b| (sample_rate / b.bandwidth()).round() as usize)
                .max()
                .expect("plans hold at least one band");
            let n_samples = FIR_TAPS + longest_period;
            let duration = n_samples as f64 / sample_rate;
            let mut y = vec![Vec::with_capacity(count); plan.len()];
            for k in 0..count {
                let signals = plan
                    .bands()
                    .iter()
                    .enumerate()
                    .map(|(n, band)| {
                        let e_r = Complex::new(
                            HBAR * model.reference_rabi()[n] / band.mu(),
                            0.0,
                        );
                        let e_s = field_conversion
                            * band.pt().sqrt()
                            * band.channel()
                            * modulator(&payload.bands()[n], band, k);
                        BandSignal::new(e_r, e_s, band.delta(), band.mu())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let trace = synthesize_waveform(
                    s,
                    &signals,
                    duration,
                    sample_rate,
                    SynthesisMode::QuasiStatic,
                )?;
                for (n, v) in demodulate_bands(&trace, plan)?.into_iter().enumerate() {
                    y[n].push(v);
                }
            }
            y
        }
    };

    let mut bands = Vec::with_capacity(plan.len());
    for (n, band) in plan.bands().iter().enumerate() {
        let kappa_n = model.kappa()[n];
        let sigma2 = noise.sigma2_total(n);
        let e_mag = received_field_amplitude(s, band);
        let snr_analytic = snr(plan, &model, &noise, n, e_mag);
        let se_contribution = weights[n] * (1.0 + snr_analytic).log2();
        let ncrlb = if snr_analytic > 0.0 {
            3.0 / (2.0 * std::f64::consts::PI * std::f64::consts::PI * snr_analytic)
        } else {
            f64::INFINITY
        };
        let observable =
            kappa_n > 0.0 && band.channel_gain_sq() > 0.0 && band.pt() > 0.0;

        let mut clean_energy = 0.0;
        let mut symbol_errors = 0_usize;
        let mut squared_error = 0.0;
        for k in 0..count {
            let clean = y_clean[n][k];
            clean_energy += clean.norm_sqr();
            let noise_seed =
                derive_seed(seed, SeedPurpose::Noise, ((n as u64) << 32) | k as u64);
            let y = add_noise(clean, sigma2, noise_seed);
            if !observable {
                continue;
            }
            match &payload.bands()[n] {
                BandPayload::Symbols { constellation, indices } => {
                    let detected = ml_detect_symbol(
                        y,
                        kappa_n,
                        field_conversion,
                        band.channel(),
                        band.pt(),
                        constellation,
                    )?;
                    if detected != indices[k] {
                        symbol_errors += 1;
                    }
                }
                BandPayload::Displacements(d) => {
                    let estimate = ml_estimate_displacement(
                        y,
                        kappa_n,
                        field_conversion,
                        band.channel(),
                        band.pt(),
                        band.omega(),
                    )?;
                    let e = circular_displacement_error(estimate, d[k], band.omega());
                    squared_error += e * e;
                }
            }
        }

        let snr_empirical = clean_energy / count as f64 / sigma2;
        let is_comm = matches!(band.service, BandService::Comm { .. });
        let ser = (observable && is_comm).then(|| symbol_errors as f64 / count as f64);
        let displacement_mse =
            (observable && !is_comm).then(|| squared_error / count as f64);
        let displacement_nmse =
            displacement_mse.map(|mse| mse / displacement_prior_variance(band.omega()));

        bands.push(BandReport {
            band: n + 1,
            snr_analytic,
            snr_empirical,
            se_contribution,
            ncrlb,
            ser,
            displacement_mse,
            displacement_nmse,
        });
    }

    Ok(TrialReport { bands, count, master_seed: seed, mode })
}

/// The clean unit-magnitude modulation of band `band`'s k-th payload
/// entry: the constellation point for symbols, e^{jωₙd/c} for
/// displacements.
fn modulator(payload: &BandPayload, band: &Band, k: usize) -> Complex<f64> {
    match payload {
        BandPayload::Symbols { constellation, indices } => constellation.point(indices[k]),
        BandPayload::Displacements(d) => {
            Complex::from_polar(1.0, band.omega() * d[k] / C_LIGHT)
        }
    }
}

/// Validates that a payload lines up with the plan band-for-band.
fn check_payload_shape(plan: &BandPlan, payload: &Payload) -> Result<(), PipelineError> {
    if payload.bands().len() != plan.len() {
        return Err(PipelineError::BandCountMismatch {
            expected: plan.len(),
            got: payload.bands().len(),
            context: "payload",
        });
    }
    for (i, (entry, band)) in payload.bands().iter().zip(plan.bands()).enumerate() {
        match (entry, band.service) {
            (BandPayload::Symbols { constellation, .. }, BandService::Comm { order }) => {
                if constellation.order() != order {
                    return Err(PipelineError::PayloadMismatch {
                        msg: format!(
                            "band {}: payload carries {}-QAM, the plan expects {}-QAM",
                            i + 1,
                            constellation.order(),
                            order
                        ),
                    });
                }
            }
            (BandPayload::Displacements(_), BandService::Sense) => {}
            (BandPayload::Symbols { .. }, BandService::Sense) => {
                return Err(PipelineError::PayloadMismatch {
                    msg: format!("band {}: payload carries symbols, the plan senses", i + 1),
                });
            }
            (BandPayload::Displacements(_), BandService::Comm { .. }) => {
                return Err(PipelineError::PayloadMismatch {
                    msg: format!("band {}: payload carries displacements, the plan communicates", i + 1),
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
