//! Payload generation and displacement estimation.
//!
//! Communication bands carry streams of square-QAM symbol indices; sensing
//! bands carry target displacements drawn uniformly over the unambiguous
//! interval of their carrier. A displacement d modulates the carrier phase
//! by ωₙd/c, so estimates are only identifiable modulo 2πc/ωₙ and every
//! comparison here is circular on (−πc/ωₙ, πc/ωₙ].

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::C_LIGHT;
use crate::scenario::{BandPlan, BandService};

use super::constellation::{equalizer_gain, Constellation};
use super::{derive_seed, PipelineError, SeedPurpose};

// ---------------------------------------------------------------------------
// Payload types
// ---------------------------------------------------------------------------

/// The data one band carries for a run of trials.
#[derive(Debug, Clone, PartialEq)]
pub enum BandPayload {
    /// A communication band: the constellation and one symbol index per
    /// trial.
    Symbols {
        /// The band's constellation.
        constellation: Constellation,
        /// Symbol indices, each < the constellation order.
        indices: Vec<usize>,
    },
    /// A sensing band: one target displacement (m) per trial, inside the
    /// unambiguous interval of the band's carrier.
    Displacements(Vec<f64>),
}

/// Per-band payloads for a run of `count` trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    bands: Vec<BandPayload>,
    count: usize,
}

impl Payload {
    /// Per-band payloads, in band-plan order.
    pub fn bands(&self) -> &[BandPayload] {
        &self.bands
    }

    /// Trials covered: every band carries exactly this many entries.
    pub fn count(&self) -> usize {
        self.count
    }
}

// ---------------------------------------------------------------------------
// Displacement interval
// ---------------------------------------------------------------------------

/// Half-width L = πc/ωₙ of the unambiguous displacement interval (m): a
/// displacement advances the carrier phase by ωₙd/c, so d and d + 2L are
/// indistinguishable.
pub fn displacement_halfwidth(omega_n: f64) -> f64 {
    assert!(
        omega_n.is_finite() && omega_n > 0.0,
        "carrier frequency must be positive and finite, got {omega_n}"
    );
    std::f64::consts::PI * C_LIGHT / omega_n
}

/// Variance L²/3 = π²c²/(3ωₙ²) of a displacement uniform over the
/// unambiguous interval; normalized estimation errors are measured against
/// this prior power.
pub fn displacement_prior_variance(omega_n: f64) -> f64 {
    let l = displacement_halfwidth(omega_n);
    l * l / 3.0
}

/// Signed circular difference `estimate − truth` wrapped into the
/// unambiguous interval (−L, L] of the band's carrier.
pub fn circular_displacement_error(estimate: f64, truth: f64, omega_n: f64) -> f64 {
    let l = displacement_halfwidth(omega_n);
    assert!(
        estimate.is_finite() && truth.is_finite(),
        "displacements must be finite, got estimate {estimate}, truth {truth}"
    );
    let span = 2.0 * l;
    let mut e = (estimate - truth) % span;
    if e > l {
        e -= span;
    } else if e <= -l {
        e += span;
    }
    e
}

// ---------------------------------------------------------------------------
// Payload generation
// ---------------------------------------------------------------------------

/// Draws a payload of `count` trials for every band of the plan.
///
/// Communication bands draw symbol indices uniformly over their
/// constellation; sensing bands draw displacements uniformly over
/// [−L, L) with L the unambiguous half-width of their carrier. Each band
/// reads an independent stream derived from the master seed via
/// [`derive_seed`] with [`SeedPurpose::Payload`] and the band index, so a
/// band's payload does not depend on how many bands precede it.
pub fn generate_payload(plan: &BandPlan, count: usize, seed: u64) -> Result<Payload, PipelineError> {
    if count == 0 {
        return Err(PipelineError::EmptyPayload);
    }
    let mut bands = Vec::with_capacity(plan.len());
    for (i, band) in plan.bands().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SeedPurpose::Payload, i as u64));
        let payload = match band.service {
            BandService::Comm { order } => {
                let constellation = Constellation::new(order)?;
                let indices = (0..count).map(|_| rng.random_range(0..order)).collect();
                BandPayload::Symbols { constellation, indices }
            }
            BandService::Sense => {
                let l = displacement_halfwidth(band.omega());
                let displacements = (0..count).map(|_| rng.random_range(-l..l)).collect();
                BandPayload::Displacements(displacements)
            }
        };
        bands.push(payload);
    }
    Ok(Payload { bands, count })
}

// ---------------------------------------------------------------------------
// Maximum-likelihood displacement estimation
// ---------------------------------------------------------------------------

/// Maximum-likelihood displacement estimate from one demodulated sensing
/// output.
///
/// The observation is yₙ = κₙ·κ_f·√P_t,n·hₙ·e^{jωₙd/c} + noise; dividing by
/// the end-to-end gain leaves a unit phasor whose angle is the ML phase
/// estimate, so d̂ = (c/ωₙ)·∠(yₙ/gain), which lands in the unambiguous
/// interval (−πc/ωₙ, πc/ωₙ] by construction of the principal angle.
pub fn ml_estimate_displacement(
    y: Complex<f64>,
    kappa_n: f64,
    field_conversion: f64,
    h_n: Complex<f64>,
    pt_n: f64,
    omega_n: f64,
) -> Result<f64, PipelineError> {
    assert!(
        omega_n.is_finite() && omega_n > 0.0,
        "carrier frequency must be positive and finite, got {omega_n}"
    );
    let gain = equalizer_gain(kappa_n, field_conversion, h_n, pt_n)?;
    Ok(C_LIGHT / omega_n * (y / gain).arg())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
