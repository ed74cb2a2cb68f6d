//! Unit-energy square-QAM constellations, maximum-likelihood symbol
//! detection, and the closed-form QPSK symbol-error reference.

use num_complex::Complex;

use super::PipelineError;

/// Constellation orders the pipeline supports: square QAM from QPSK up to
/// 256-QAM.
pub const SUPPORTED_ORDERS: [usize; 4] = [4, 16, 64, 256];

/// A square M-QAM constellation normalized to unit mean symbol energy.
///
/// Points are enumerated in a fixed lexicographic order — ascending real
/// level first, ascending imaginary level within each real level — so a
/// symbol index identifies the same point everywhere and detection
/// tie-breaks are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    points: Vec<Complex<f64>>,
}

impl Constellation {
    /// Builds the unit-energy constellation of the given order.
    ///
    /// Levels are the usual odd integers ±1, ±3, …, ±(√M−1) on each axis,
    /// scaled by √(3/(2(M−1))) so the average energy over the M points is 1
    /// up to rounding (for QPSK the scale is √½ and every point sits on the
    /// unit circle).
    pub fn new(order: usize) -> Result<Self, PipelineError> {
        if !SUPPORTED_ORDERS.contains(&order) {
            return Err(PipelineError::UnsupportedOrder { order });
        }
        let side = (order as f64).sqrt().round() as usize;
        debug_assert_eq!(side * side, order, "supported orders are perfect squares");
        let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let level = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) * scale;
        let mut points = Vec::with_capacity(order);
        for re in 0..side {
            for im in 0..side {
                points.push(Complex::new(level(re), level(im)));
            }
        }
        Ok(Constellation { order, points })
    }

    /// Constellation order M.
    pub fn order(&self) -> usize {
        self.order
    }

    /// All M points in index order.
    pub fn points(&self) -> &[Complex<f64>] {
        &self.points
    }

    /// The point at a symbol index.
    pub fn point(&self, index: usize) -> Complex<f64> {
        assert!(
            index < self.order,
            "symbol index {index} out of range for order {}",
            self.order
        );
        self.points[index]
    }

    /// Mean symbol energy Σ|sᵢ|²/M (1 up to rounding, by construction).
    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.order as f64
    }

    /// Index of the constellation point nearest to `y` in Euclidean
    /// distance. Exact ties resolve to the smallest index (the scan keeps
    /// the first minimum), so detection is deterministic.
    pub fn nearest(&self, y: Complex<f64>) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, s) in self.points.iter().enumerate() {
            let dist = (y - s).norm_sqr();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Maximum-likelihood detection
// ---------------------------------------------------------------------------

/// Maximum-likelihood symbol detection on one demodulated band output.
///
/// The demodulated observation is yₙ = κₙ·E_s,n + noise with
/// E_s,n = κ_f·√P_t,n·hₙ·sₙ, so the equalizer divides by the end-to-end
/// complex gain κₙ·κ_f·hₙ·√P_t,n and picks the nearest constellation point
/// (the noise is circular Gaussian, so nearest-point is ML). Returns the
/// detected symbol index.
pub fn ml_detect_symbol(
    y: Complex<f64>,
    kappa_n: f64,
    field_conversion: f64,
    h_n: Complex<f64>,
    pt_n: f64,
    constellation: &Constellation,
) -> Result<usize, PipelineError> {
    let gain = equalizer_gain(kappa_n, field_conversion, h_n, pt_n)?;
    Ok(constellation.nearest(y / gain))
}

/// End-to-end complex gain κₙ·κ_f·hₙ·√P_t,n shared by the symbol and
/// displacement equalizers; zero gain means the band is unobservable.
pub(super) fn equalizer_gain(
    kappa_n: f64,
    field_conversion: f64,
    h_n: Complex<f64>,
    pt_n: f64,
) -> Result<Complex<f64>, PipelineError> {
    assert!(
        kappa_n.is_finite() && kappa_n >= 0.0,
        "band gain must be nonnegative and finite, got {kappa_n}"
    );
    assert!(
        field_conversion.is_finite() && field_conversion > 0.0,
        "field conversion must be positive and finite, got {field_conversion}"
    );
    assert!(
        h_n.re.is_finite() && h_n.im.is_finite(),
        "channel coefficient must be finite, got {h_n}"
    );
    assert!(
        pt_n.is_finite() && pt_n >= 0.0,
        "transmit power must be nonnegative and finite, got {pt_n}"
    );
    let gain = kappa_n * field_conversion * pt_n.sqrt() * h_n;
    if gain.norm_sqr() == 0.0 {
        return Err(PipelineError::ZeroGain);
    }
    Ok(gain)
}

// ---------------------------------------------------------------------------
// Closed-form error reference
// ---------------------------------------------------------------------------

/// Exact QPSK symbol-error rate over a circular-Gaussian channel at
/// per-symbol SNR γ: SER = 2Q(√γ) − Q²(√γ).
pub fn qpsk_ser_closed_form(snr: f64) -> f64 {
    assert!(
        snr.is_finite() && snr >= 0.0,
        "SNR must be nonnegative and finite, got {snr}"
    );
    let q = 0.5 * libm::erfc((snr / 2.0).sqrt());
    2.0 * q - q * q
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
