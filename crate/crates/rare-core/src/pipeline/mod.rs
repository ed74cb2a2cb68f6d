//! Communication and sensing pipeline over the demodulated probe power.
//!
//! The transfer chain ([`crate::transfer`]) turns RF band signals into one
//! real probe-power waveform. This module owns everything after that
//! physical front end:
//!
//! * square-QAM constellations and payload generation (symbols for
//!   communication bands, displacements for sensing bands);
//! * per-band IQ demodulation of a probe-power trace — DC removal, complex
//!   mixing at each intermediate frequency, windowed-sinc low-pass
//!   filtering, and gain/phase restoration — recovering yₙ ≈ κₙ·E_s,n;
//! * additive complex-Gaussian measurement noise with the variances of the
//!   physical noise model;
//! * maximum-likelihood symbol detection and displacement estimation, with
//!   their closed-form error references (QPSK symbol-error rate, normalized
//!   Cramér-Rao bound);
//! * a conventional antenna + low-noise-amplifier receiver baseline;
//! * a deterministic Monte Carlo trial driver reporting empirical and
//!   analytic figures side by side.
//!
//! Every random quantity is drawn from a stream seeded through
//! [`derive_seed`], so a trial is a pure function of (scenario, plan,
//! operating point, payload, master seed): two runs with the same inputs
//! produce bit-for-bit identical reports.

use thiserror::Error;

use crate::transfer::TransferError;

mod constellation;
mod demod;
mod payload;
mod trial;

pub use constellation::{ml_detect_symbol, qpsk_ser_closed_form, Constellation, SUPPORTED_ORDERS};
pub use demod::{add_noise, demodulate_bands, demodulate_bands_with_phases, lowpass_taps, FIR_TAPS};
pub use payload::{
    circular_displacement_error, displacement_halfwidth, displacement_prior_variance,
    generate_payload, ml_estimate_displacement, BandPayload, Payload,
};
pub use trial::{classic_receiver_snr, run_trial, BandReport, ClassicReceiverConfig, TrialMode, TrialReport};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Errors surfaced by payload generation, demodulation, detection, and the
/// trial driver.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// A constellation order outside the supported square-QAM set.
    #[error("unsupported constellation order {order}; supported orders are 4, 16, 64 and 256")]
    UnsupportedOrder {
        /// The requested order.
        order: usize,
    },
    /// A payload with no symbols carries nothing to transmit or estimate.
    #[error("payload must carry at least one symbol per band")]
    EmptyPayload,
    /// A payload that does not line up with the band plan it is run against.
    #[error("payload does not match the band plan: {msg}")]
    PayloadMismatch {
        /// What failed to line up, naming the band where applicable.
        msg: String,
    },
    /// A waveform trace too short for the demodulation filter.
    #[error("trace of {len} samples is too short to demodulate; need at least {min}")]
    TraceTooShort {
        /// Samples in the offending trace.
        len: usize,
        /// Minimum sample count: the low-pass filter length.
        min: usize,
    },
    /// Two per-band sequences that should cover the same plan disagree.
    #[error("{context} covers {got} bands, the band plan has {expected}")]
    BandCountMismatch {
        /// Bands in the plan.
        expected: usize,
        /// Bands actually supplied.
        got: usize,
        /// Which input disagreed.
        context: &'static str,
    },
    /// Equalization is impossible: the end-to-end gain κₙ·κ_f·hₙ·√P_t is
    /// zero (zero attention, dead channel, or zero transmit power).
    #[error("cannot equalize a band with zero end-to-end gain")]
    ZeroGain,
    /// A transfer-chain failure while synthesizing or validating waveforms.
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

// ---------------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------------

/// What a derived random stream is used for. The purpose tag keeps streams
/// for different jobs disjoint even when their indices coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    /// Payload content: symbol indices and displacement draws.
    Payload = 1,
    /// Measurement noise added to demodulated band outputs.
    Noise = 2,
    /// Randomized attention vectors drawn by experiment drivers.
    Attention = 3,
}

/// Derives an independent stream seed from a master seed.
///
/// The splitting rule is fixed so results are reproducible across runs and
/// machines: the purpose tag occupies the top byte of a 64-bit stream id,
/// the caller's index the low 56 bits, and the id is passed through two
/// rounds of the SplitMix64 finalizer around an XOR with the master seed.
/// Per-band streams use the band index directly; per-measurement noise
/// streams pack the band index into bits 32..56 and the trial index into
/// bits 0..32 (see [`run_trial`]).
pub fn derive_seed(master: u64, purpose: SeedPurpose, index: u64) -> u64 {
    assert!(
        index < 1 << 56,
        "stream index {index} does not fit the 56-bit field of the splitting rule"
    );
    let stream = ((purpose as u64) << 56) | index;
    splitmix64(master ^ splitmix64(stream))
}

/// SplitMix64 finalizer: a bijective mixer whose outputs pass statistical
/// tests even on counter inputs, which is exactly the stream-id use here.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
