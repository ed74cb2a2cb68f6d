//! IQ demodulation of probe-power waveforms and measurement noise.
//!
//! The transmitted probe power is one real signal carrying every band's
//! data as amplitude modulation at that band's intermediate frequency:
//! 𝒫(t) ≈ 𝒫ᵣ + Σₙ κₙ·Re{E_s,n·e^{j(δₙt−∠E_r,n)}}. Demodulation recovers
//! the per-band complex amplitudes the detectors work on: remove the DC
//! bias, mix down at δₙ, low-pass to the band's width, undo the mixing
//! halving and the sign of the power slope, and restore the reference
//! phase, leaving yₙ ≈ κₙ·E_s,n.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constants::TWO_PI;
use crate::scenario::BandPlan;
use crate::transfer::{TransferError, WaveformTrace, MIN_OVERSAMPLING_FACTOR};

use super::PipelineError;

/// Low-pass filter length used by [`demodulate_bands`]. 401 taps of a
/// Hamming-windowed sinc at the default 16 MS/s rate put better than 39 dB
/// of attenuation at the 100 kHz spacing between neighbouring intermediate
/// frequencies, and averaging over the trial window suppresses what leaks
/// through well past 40 dB.
pub const FIR_TAPS: usize = 401;

// ---------------------------------------------------------------------------
// Filter design
// ---------------------------------------------------------------------------

/// Hamming-windowed-sinc low-pass taps with unit DC gain.
///
/// `taps` must be odd so the group delay is a whole number of samples and
/// the filter is exactly linear-phase. The taps are normalized to Σh = 1,
/// pinning |H(0)| = 1 so the demodulated amplitude needs no passband
/// correction.
pub fn lowpass_taps(taps: usize, cutoff: f64, sample_rate: f64) -> Vec<f64> {
    assert!(taps >= 3 && taps % 2 == 1, "tap count must be odd and at least 3, got {taps}");
    assert!(
        cutoff.is_finite() && cutoff > 0.0,
        "cutoff must be positive and finite, got {cutoff}"
    );
    assert!(
        sample_rate.is_finite() && sample_rate > 2.0 * cutoff,
        "sample rate {sample_rate} must exceed twice the cutoff {cutoff}"
    );
    let mid = (taps - 1) / 2;
    let mut h = vec![0.0; taps];
    // Fill the left half and mirror it, so the taps are symmetric to the
    // bit (exactly linear phase) regardless of how cos and sin round.
    for k in 0..=mid {
        let x = 2.0 * cutoff * (k as f64 - mid as f64) / sample_rate;
        let sinc = if x == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        let window = 0.54 - 0.46 * (TWO_PI * k as f64 / (taps - 1) as f64).cos();
        let v = 2.0 * cutoff / sample_rate * sinc * window;
        h[k] = v;
        h[taps - 1 - k] = v;
    }
    let sum: f64 = h.iter().sum();
    assert!(sum > 0.0, "windowed sinc must have positive DC gain, got {sum}");
    for v in &mut h {
        *v /= sum;
    }
    h
}

// ---------------------------------------------------------------------------
// Demodulation
// ---------------------------------------------------------------------------

/// Demodulates every planned band out of a probe-power trace, assuming the
/// plan's zero-phase reference tones (the convention produced by
/// [`crate::transfer::BandSignal::from_band`]).
pub fn demodulate_bands(
    trace: &WaveformTrace,
    plan: &BandPlan,
) -> Result<Vec<Complex<f64>>, PipelineError> {
    demodulate_bands_with_phases(trace, plan, &vec![0.0; plan.len()])
}

/// [`demodulate_bands`] for reference tones of arbitrary phase: band n's
/// output is rotated by e^{+j∠E_r,n} to undo the phase the linearized
/// chain imprints on the beat.
///
/// For each band the trace is mean-subtracted (removing the DC bias 𝒫ᵣ),
/// mixed down by e^{−jδₙt}, filtered by [`lowpass_taps`] with cutoff Bₙ/2,
/// and the fully-overlapped filter outputs are averaged. Mixing a real
/// passband tone halves its amplitude and the probe-power slope behind the
/// gain decomposition is negative, so the average is scaled by −2 before
/// the phase rotation; the result is yₙ ≈ κₙ·E_s,n with the positive κₙ of
/// [`crate::transfer::TransferModel::kappa`]. The filter-and-average is
/// evaluated as Σⱼ hⱼ·(running means of the mixed signal), which equals
/// averaging the convolution over its fully-overlapped region.
pub fn demodulate_bands_with_phases(
    trace: &WaveformTrace,
    plan: &BandPlan,
    reference_phases: &[f64],
) -> Result<Vec<Complex<f64>>, PipelineError> {
    if reference_phases.len() != plan.len() {
        return Err(PipelineError::BandCountMismatch {
            expected: plan.len(),
            got: reference_phases.len(),
            context: "reference phases",
        });
    }
    for (i, &p) in reference_phases.iter().enumerate() {
        assert!(p.is_finite(), "reference phase of band {} must be finite, got {p}", i + 1);
    }
    if trace.len() < FIR_TAPS {
        return Err(PipelineError::TraceTooShort { len: trace.len(), min: FIR_TAPS });
    }
    let max_if_hz = plan.bands().iter().map(|b| b.delta()).fold(0.0, f64::max) / TWO_PI;
    let required = MIN_OVERSAMPLING_FACTOR * max_if_hz;
    if trace.sample_rate() <= required {
        return Err(TransferError::Undersampled { sample_rate: trace.sample_rate(), required }.into());
    }

    let samples = trace.samples();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;

    let mut out = Vec::with_capacity(plan.len());
    for (band, &phase) in plan.bands().iter().zip(reference_phases) {
        let taps = lowpass_taps(FIR_TAPS, band.bandwidth() / 2.0, trace.sample_rate());

        // Prefix sums of the mixed-down signal; prefix[i] = Σ_{k<i} m[k].
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        let mut acc = Complex::new(0.0, 0.0);
        prefix.push(acc);
        for (i, &v) in samples.iter().enumerate() {
            acc += (v - mean) * Complex::from_polar(1.0, -band.delta() * trace.time_at(i));
            prefix.push(acc);
        }

        let overlapped = samples.len() - FIR_TAPS + 1;
        let mut avg = Complex::new(0.0, 0.0);
        for (j, &h) in taps.iter().enumerate() {
            avg += h * (prefix[j + overlapped] - prefix[j]);
        }
        avg /= overlapped as f64;

        out.push(-2.0 * avg * Complex::from_polar(1.0, phase));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Measurement noise
// ---------------------------------------------------------------------------

/// Adds circular complex Gaussian noise of total variance `sigma2` to a
/// demodulated band output: each quadrature receives an independent
/// N(0, σ²/2) draw from a ChaCha8 stream seeded with `seed`, so a given
/// (value, variance, seed) triple always produces the same observation.
/// Zero variance returns the input unchanged.
pub fn add_noise(clean: Complex<f64>, sigma2: f64, seed: u64) -> Complex<f64> {
    assert!(
        sigma2.is_finite() && sigma2 >= 0.0,
        "noise variance must be nonnegative and finite, got {sigma2}"
    );
    if sigma2 == 0.0 {
        return clean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (sigma2 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    clean + Complex::new(scale * re, scale * im)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::HBAR;
    use crate::optimizer::optimal_sum_square;
    use crate::scenario::default_scenario;
    use crate::transfer::{
        gain_decomposition, synthesize_waveform, BandSignal, SynthesisMode,
    };
    use super::super::{derive_seed, SeedPurpose};

    /// |H(f)| of a tap vector at sample rate `fs`.
    fn response(taps: &[f64], f: f64, fs: f64) -> f64 {
        taps.iter()
            .enumerate()
            .map(|(k, &h)| h * Complex::from_polar(1.0, -TWO_PI * f * k as f64 / fs))
            .sum::<Complex<f64>>()
            .norm()
    }

    #[test]
    fn filter_has_unit_dc_gain_and_the_frozen_stopband() {
        let taps = lowpass_taps(FIR_TAPS, 40e3, 16e6);
        let sum: f64 = taps.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "taps must be normalized to Σh = 1, got {sum}");
        assert!(
            (response(&taps, 0.0, 16e6) - 1.0).abs() <= 1e-12,
            "DC gain must be exactly the tap sum"
        );

        // Frozen magnitude response at the neighbouring-band spacing and at
        // twice that, for the default 80 kHz bands on a 100 kHz IF grid.
        let at_100k = response(&taps, 100e3, 16e6);
        assert!(
            (at_100k - 1.0884459542245047e-2).abs() <= 1e-10,
            "response at 100 kHz drifted from its frozen value: {at_100k:e}"
        );
        assert!(at_100k < 0.012, "neighbour-spacing attenuation must beat 38 dB");
        let at_200k = response(&taps, 200e3, 16e6);
        assert!(
            (at_200k - 1.7975145462625908e-4).abs() <= 1e-10,
            "response at 200 kHz drifted from its frozen value: {at_200k:e}"
        );

        // Linear phase: taps are exactly symmetric.
        for k in 0..FIR_TAPS / 2 {
            assert_eq!(
                taps[k],
                taps[FIR_TAPS - 1 - k],
                "windowed-sinc taps must be symmetric (index {k})"
            );
        }
    }

    #[test]
    #[should_panic(expected = "odd")]
    fn even_tap_counts_are_refused() {
        lowpass_taps(400, 40e3, 16e6);
    }

    /// Single-band linearized trace with the model's reference tone and a
    /// constant data amplitude; returns (plan-restricted trace, κ, E_s).
    fn single_band_setup(e_s: Complex<f64>) -> (WaveformTrace, f64, Complex<f64>, BandPlan) {
        let (s, plan, d) = default_scenario();
        let band = plan.bands()[0].clone();
        let single = BandPlan::new(vec![band]).expect("single-band plan must validate");
        let a_star = optimal_sum_square(d.chi0, d.big_gamma_sq);
        let model =
            gain_decomposition(&s, &single, a_star, &[1.0]).expect("decomposition must build");
        let omega_r = model.reference_rabi()[0];
        let b = &single.bands()[0];
        let signal = BandSignal::new(
            Complex::new(HBAR * omega_r / b.mu(), 0.0),
            e_s,
            b.delta(),
            b.mu(),
        )
        .expect("signal must validate");
        let n = FIR_TAPS + (16e6 / b.bandwidth()).round() as usize;
        let trace = synthesize_waveform(
            &s,
            &[signal],
            n as f64 / 16e6,
            16e6,
            SynthesisMode::Linearized,
        )
        .expect("synthesis must succeed");
        (trace, model.kappa()[0], e_s, single)
    }

    #[test]
    fn single_band_recovery_within_a_tenth_of_a_percent() {
        let e_s = Complex::from_polar(1e-4, 0.7);
        let (trace, kappa, e_s, plan) = single_band_setup(e_s);
        let y = demodulate_bands(&trace, &plan).expect("demodulation must succeed")[0];
        let want = kappa * e_s;
        assert!(
            (y - want).norm() <= 1e-3 * want.norm(),
            "demodulated amplitude {y} strays more than 0.1% from κE_s = {want}"
        );
    }

    #[test]
    fn reference_phase_is_unwound() {
        // A reference tone with nonzero phase imprints e^{−j∠E_r} on the
        // beat; the phase-aware demodulator must take it back out.
        let (s, plan, d) = default_scenario();
        let band = plan.bands()[0].clone();
        let single = BandPlan::new(vec![band]).expect("single-band plan must validate");
        let a_star = optimal_sum_square(d.chi0, d.big_gamma_sq);
        let model =
            gain_decomposition(&s, &single, a_star, &[1.0]).expect("decomposition must build");
        let b = &single.bands()[0];
        let phase = 1.1;
        let e_r = Complex::from_polar(HBAR * model.reference_rabi()[0] / b.mu(), phase);
        let e_s = Complex::from_polar(1e-4, -0.4);
        let signal = BandSignal::new(e_r, e_s, b.delta(), b.mu()).expect("signal must validate");
        let n = FIR_TAPS + (16e6 / b.bandwidth()).round() as usize;
        let trace =
            synthesize_waveform(&s, &[signal], n as f64 / 16e6, 16e6, SynthesisMode::Linearized)
                .expect("synthesis must succeed");

        let y = demodulate_bands_with_phases(&trace, &single, &[phase])
            .expect("demodulation must succeed")[0];
        let want = model.kappa()[0] * e_s;
        assert!(
            (y - want).norm() <= 1e-3 * want.norm(),
            "phase-aware demodulation {y} strays from κE_s = {want}"
        );

        // Ignoring the reference phase leaves the output rotated by −∠E_r.
        let unaware = demodulate_bands(&trace, &single).expect("demodulation must succeed")[0];
        let rotated = want * Complex::from_polar(1.0, -phase);
        assert!(
            (unaware - rotated).norm() <= 1e-3 * want.norm(),
            "phase-unaware output should be the rotated amplitude, got {unaware} want {rotated}"
        );
    }

    #[test]
    fn silent_band_leaks_forty_decibels_down() {
        let (s, plan, d) = default_scenario();
        let a_star = optimal_sum_square(d.chi0, d.big_gamma_sq);
        let model = gain_decomposition(&s, &plan, a_star, &[0.5, 0.5])
            .expect("decomposition must build");
        let e_s = Complex::from_polar(1e-4, 0.3);
        let signals: Vec<BandSignal> = plan
            .bands()
            .iter()
            .zip(model.reference_rabi())
            .enumerate()
            .map(|(i, (b, omega_r))| {
                let data = if i == 0 { e_s } else { Complex::new(0.0, 0.0) };
                BandSignal::new(
                    Complex::new(HBAR * omega_r / b.mu(), 0.0),
                    data,
                    b.delta(),
                    b.mu(),
                )
                .expect("signal must validate")
            })
            .collect();
        let n = FIR_TAPS + (16e6_f64 / 80e3).round() as usize;
        let trace =
            synthesize_waveform(&s, &signals, n as f64 / 16e6, 16e6, SynthesisMode::Linearized)
                .expect("synthesis must succeed");

        let y = demodulate_bands(&trace, &plan).expect("demodulation must succeed");
        let active = y[0].norm();
        let leaked = y[1].norm();
        assert!(
            leaked < 1e-2 * active,
            "silent band must stay 40 dB below the active one, got {:.1} dB",
            20.0 * (leaked / active).log10()
        );
    }

    #[test]
    fn undersampled_and_short_traces_are_refused() {
        let (_, plan, _) = default_scenario();

        // 500 kS/s cannot resolve a 200 kHz intermediate frequency.
        let slow = WaveformTrace::new(0.0, 5e5, vec![1e-6; 2 * FIR_TAPS])
            .expect("trace must validate");
        let err = demodulate_bands(&slow, &plan).expect_err("undersampled trace must be refused");
        assert!(
            matches!(err, PipelineError::Transfer(TransferError::Undersampled { .. })),
            "expected Undersampled, got {err}"
        );

        // Shorter than the filter: no fully-overlapped output exists.
        let short = WaveformTrace::new(0.0, 16e6, vec![1e-6; FIR_TAPS - 1])
            .expect("trace must validate");
        let err = demodulate_bands(&short, &plan).expect_err("short trace must be refused");
        assert!(
            matches!(err, PipelineError::TraceTooShort { len, min }
                if len == FIR_TAPS - 1 && min == FIR_TAPS),
            "expected TraceTooShort, got {err}"
        );

        // A phase vector for the wrong number of bands.
        let ok = WaveformTrace::new(0.0, 16e6, vec![1e-6; 2 * FIR_TAPS])
            .expect("trace must validate");
        let err = demodulate_bands_with_phases(&ok, &plan, &[0.0])
            .expect_err("mismatched phases must be refused");
        assert!(
            matches!(err, PipelineError::BandCountMismatch { expected: 2, got: 1, .. }),
            "expected BandCountMismatch, got {err}"
        );
    }

    #[test]
    fn noise_is_reproducible_and_zero_variance_is_identity() {
        let clean = Complex::new(3.0e-7, -1.2e-7);
        assert_eq!(
            add_noise(clean, 0.0, 5),
            clean,
            "zero variance must return the input unchanged"
        );
        assert_eq!(
            add_noise(clean, 1e-16, 77),
            add_noise(clean, 1e-16, 77),
            "equal seeds must reproduce the draw"
        );
        assert_ne!(
            add_noise(clean, 1e-16, 77),
            add_noise(clean, 1e-16, 78),
            "different seeds must change the draw"
        );
    }

    #[test]
    fn noise_statistics_match_the_requested_variance() {
        // Statistical contract: per-quadrature variance σ²/2, independent
        // quadratures. 10⁶ draws pin the total variance within 0.5% and the
        // quadrature covariance within 3 standard errors.
        let sigma2 = 2.0;
        let n = 1_000_000_usize;
        let clean = Complex::new(0.0, 0.0);
        let mut sum = Complex::new(0.0, 0.0);
        let mut sum_sq = 0.0;
        let mut cov = 0.0;
        for k in 0..n {
            let z = add_noise(clean, sigma2, derive_seed(4242, SeedPurpose::Noise, k as u64));
            sum += z;
            sum_sq += z.norm_sqr();
            cov += z.re * z.im;
        }
        let mean = sum / n as f64;
        assert!(
            mean.norm() <= 4.0 * (sigma2 / n as f64).sqrt(),
            "sample mean {mean} strays too far from zero"
        );
        let var = sum_sq / n as f64 - mean.norm_sqr();
        assert!(
            (var - sigma2).abs() <= 5e-3 * sigma2,
            "sample variance {var} deviates more than 0.5% from σ² = {sigma2}"
        );
        let cov = cov / n as f64 - mean.re * mean.im;
        let cov_se = sigma2 / 2.0 / (n as f64).sqrt();
        assert!(
            cov.abs() <= 3.0 * cov_se,
            "quadrature covariance {cov:e} exceeds 3 standard errors ({cov_se:e})"
        );
    }
}
