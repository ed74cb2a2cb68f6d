//! Reference-drive resource allocation.
//!
//! The receiver's sensitivity is governed by two knobs: the Rabi sum-square
//! 𝒜 = ΣΩ_r,n² (total reference drive power, setting the global gain) and
//! the attention vector αₙ = Ω_r,n²/𝒜 (how that drive is split across
//! bands). This module provides:
//!
//! - the closed-form optimal sum-square 𝒜★ maximizing the global gain per
//!   unit of shot noise (ϱ₀²/𝒫ᵣ), with its objective exposed in both the
//!   direct and the substituted x = 𝒜/(𝒜+Γ²) parameterizations;
//! - the spectral-efficiency-optimal attention vector via the KKT
//!   water-filling form, with the multiplier found by bisection;
//! - the sensing-optimal attention vector (closed form) and the normalized
//!   Cramér-Rao bound it minimizes.
//!
//! Everything here is plain-float math: callers build the per-band problem
//! coefficients from a scenario through the transfer-chain module.

use thiserror::Error;

use crate::constants::HBAR;

/// Convergence tolerance on Σαₙ = 1 for the bisection on the multiplier.
pub const ATTENTION_SUM_TOL: f64 = 1e-10;

/// Maximum bisection iterations before reporting non-convergence.
pub const BISECTION_MAX_ITERS: usize = 200;

/// Errors from the allocation solvers.
#[derive(Debug, Error)]
pub enum OptimizerError {
    /// A problem description violated its invariants.
    #[error("invalid allocation problem: {msg}")]
    InvalidProblem { msg: String },
    /// The bisection failed to meet [`ATTENTION_SUM_TOL`] within
    /// [`BISECTION_MAX_ITERS`] iterations; the bracket state is reported.
    #[error(
        "attention bisection did not converge after {iterations} iterations \
         (bracket [{bracket_lo:e}, {bracket_hi:e}], attention sum {sum:e})"
    )]
    NotConverged {
        iterations: usize,
        bracket_lo: f64,
        bracket_hi: f64,
        sum: f64,
    },
}

// ---------------------------------------------------------------------------
// Optimal Rabi sum-square
// ---------------------------------------------------------------------------

/// Optimal Rabi sum-square 𝒜★ (rad/s)² maximizing ϱ₀²/𝒫ᵣ.
///
/// Algebraically equal to Γ²·(χ₀+4−R)/(χ₀−4+R) with R = √(χ₀²+4χ₀+16),
/// but evaluated in the fully rationalized form 2Γ²/(χ₀+2+R), which is free
/// of subtractive cancellation for every χ₀ > 0 (the direct form loses all
/// precision as χ₀ → 0, where 𝒜★ → Γ²/3).
pub fn optimal_sum_square(chi0: f64, big_gamma_sq: f64) -> f64 {
    2.0 * big_gamma_sq / (chi0 + 2.0 + discriminant_root(chi0))
}

/// The optimum in the substituted coordinate x★ = 𝒜★/(𝒜★+Γ²) ∈ (0, 1/4].
pub fn optimal_x(chi0: f64) -> f64 {
    2.0 / (chi0 + 4.0 + discriminant_root(chi0))
}

fn discriminant_root(chi0: f64) -> f64 {
    (chi0 * chi0 + 4.0 * chi0 + 16.0).sqrt()
}

/// Sensitivity objective g(𝒜) = ϱ₀²/𝒫ᵣ =
/// (4χ₀²Γ⁴P_in/ħ²)·exp(−χ₀𝒜/(𝒜+Γ²))·𝒜/(𝒜+Γ²)⁴, in W/(J·s)² — only its
/// argmax matters, so the unit never surfaces.
pub fn sum_square_objective(a: f64, chi0: f64, big_gamma_sq: f64, p_in: f64) -> f64 {
    let denom = a + big_gamma_sq;
    let scale = 4.0 * chi0 * chi0 * big_gamma_sq * big_gamma_sq * p_in / (HBAR * HBAR);
    scale * (-chi0 * a / denom).exp() * a / (denom * denom * denom * denom)
}

/// The same objective in the substituted coordinate x = 𝒜/(𝒜+Γ²):
/// g(x) = (4χ₀²P_in/(ħ²Γ²))·e^{−χ₀x}·x·(1−x)³. Equal to
/// [`sum_square_objective`] at x = 𝒜/(𝒜+Γ²) — the substitution that makes
/// the optimum a cubic root.
pub fn sum_square_objective_x(x: f64, chi0: f64, big_gamma_sq: f64, p_in: f64) -> f64 {
    let scale = 4.0 * chi0 * chi0 * p_in / (HBAR * HBAR * big_gamma_sq);
    let omx = 1.0 - x;
    scale * (-chi0 * x).exp() * x * omx * omx * omx
}

// ---------------------------------------------------------------------------
// Spectral-efficiency-optimal attention
// ---------------------------------------------------------------------------

/// Per-band coefficients of the spectral-efficiency allocation problem:
/// maximize Σ γₙ·log₂(1 + βₙαₙ/(αₙ+εₙ)) over the attention simplex, where
/// γₙ is the bandwidth fraction, βₙ the band's peak SNR scale, and εₙ the
/// shot-to-blackbody noise ratio at the operating point.
#[derive(Debug, Clone)]
pub struct SeAllocationProblem {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    eps: Vec<f64>,
}

impl SeAllocationProblem {
    /// Validates the coefficient vectors: equal lengths, all positive and
    /// finite, bandwidth fractions summing to 1.
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>, eps: Vec<f64>) -> Result<Self, OptimizerError> {
        let n = gamma.len();
        if n == 0 || beta.len() != n || eps.len() != n {
            return Err(OptimizerError::InvalidProblem {
                msg: format!(
                    "coefficient lengths must match and be nonzero (gamma {}, beta {}, eps {})",
                    gamma.len(),
                    beta.len(),
                    eps.len()
                ),
            });
        }
        for (name, v) in [("gamma", &gamma), ("beta", &beta), ("eps", &eps)] {
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(OptimizerError::InvalidProblem {
                    msg: format!("{name} entries must be positive and finite: {v:?}"),
                });
            }
        }
        let gsum: f64 = gamma.iter().sum();
        if (gsum - 1.0).abs() > 1e-9 {
            return Err(OptimizerError::InvalidProblem {
                msg: format!("bandwidth fractions must sum to 1, got {gsum}"),
            });
        }
        Ok(SeAllocationProblem { gamma, beta, eps })
    }

    /// Number of bands.
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    /// True when the problem has no bands (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Bandwidth fractions γₙ.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// SNR scales βₙ.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Noise ratios εₙ.
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    /// The water-filling attention for a given multiplier ν:
    /// αₙ(ν) = max(0, (−(2+βₙ)εₙ + √(βₙ²εₙ² + 4νγₙβₙ(1+βₙ)εₙ))/(2(1+βₙ))),
    /// evaluated in the rationalized form
    /// 2εₙ(νγₙβₙ − εₙ)/(√(βₙ²εₙ² + 4νγₙβₙ(1+βₙ)εₙ) + (2+βₙ)εₙ)
    /// so that no digits are lost to `√D − (2+βₙ)εₙ` cancellation when εₙ is
    /// large. Each component is continuous and nondecreasing in ν.
    pub fn attention_at(&self, nu: f64) -> Vec<f64> {
        (0..self.len())
            .map(|n| {
                let (g, b, e) = (self.gamma[n], self.beta[n], self.eps[n]);
                let disc = b * b * e * e + 4.0 * nu * g * b * (1.0 + b) * e;
                let alpha = 2.0 * e * (nu * g * b - e) / (disc.sqrt() + (2.0 + b) * e);
                alpha.max(0.0)
            })
            .collect()
    }

    /// Marginal SE gain of band `n` at attention `alpha_n`:
    /// γₙβₙεₙ/(((1+βₙ)αₙ+εₙ)(αₙ+εₙ)). The KKT stationarity condition sets
    /// this equal to 1/ν★ on every active band (the log₂ factor is absorbed
    /// into ν★).
    pub fn marginal_gain(&self, n: usize, alpha_n: f64) -> f64 {
        let (g, b, e) = (self.gamma[n], self.beta[n], self.eps[n]);
        g * b * e / (((1.0 + b) * alpha_n + e) * (alpha_n + e))
    }

    /// Diagonal Hessian entry ∂²SE/∂αₙ² of [`se_objective`] (in bps/Hz per
    /// unit attention squared); strictly negative, establishing concavity.
    pub fn curvature(&self, n: usize, alpha_n: f64) -> f64 {
        let (g, b, e) = (self.gamma[n], self.beta[n], self.eps[n]);
        let u = (1.0 + b) * alpha_n + e;
        let v = alpha_n + e;
        -g * b * e * ((1.0 + b) * v + u) / (std::f64::consts::LN_2 * u * u * v * v)
    }
}

/// Result of the SE attention optimization.
#[derive(Debug, Clone)]
pub struct SeAllocation {
    /// Optimal attention vector α★ (sums to 1 within [`ATTENTION_SUM_TOL`]).
    pub alpha: Vec<f64>,
    /// The KKT multiplier ν★ at the optimum.
    pub nu: f64,
    /// Bisection iterations consumed.
    pub iterations: usize,
}

/// Spectral efficiency Σ γₙ·log₂(1 + βₙαₙ/(αₙ+εₙ)) in bps/Hz.
///
/// A band with αₙ = 0 contributes exactly zero.
pub fn se_objective(alpha: &[f64], problem: &SeAllocationProblem) -> f64 {
    assert_eq!(
        alpha.len(),
        problem.len(),
        "attention vector length {} must match the problem band count {}",
        alpha.len(),
        problem.len()
    );
    (0..problem.len())
        .map(|n| {
            let (g, b, e) = (problem.gamma[n], problem.beta[n], problem.eps[n]);
            let a = alpha[n];
            g * (1.0 + b * a / (a + e)).log2()
        })
        .sum()
}

/// Maximizes [`se_objective`] over the attention simplex.
///
/// The optimizer evaluates the closed-form water-filling attention
/// [`SeAllocationProblem::attention_at`] and bisects on the multiplier ν
/// until Σαₙ(ν) = 1 within [`ATTENTION_SUM_TOL`]. Σαₙ(ν) is continuous and
/// nondecreasing (each band activates once its marginal gain reaches 1/ν),
/// so bisection cannot stall; the bracket is grown geometrically first.
///
/// When the coefficients span many decades the multiplier can be so large
/// that one ulp of ν moves the attention sum by more than the tolerance; no
/// representable ν then satisfies it. Once the bracket collapses to adjacent
/// floats the upper-endpoint allocation (sum ≥ 1 by the bracket invariant)
/// is rescaled onto the simplex instead. The rescale factor is the endpoint
/// sum itself, so the stationarity slack it introduces is bounded by the
/// float-resolution limit that forced it.
pub fn optimal_attention_se(problem: &SeAllocationProblem) -> Result<SeAllocation, OptimizerError> {
    let sum_at = |nu: f64| -> f64 { problem.attention_at(nu).iter().sum() };
    let mut lo = 0.0_f64; // sum = 0 < 1
    let mut hi = 1.0_f64;
    let mut grow_steps = 0usize;
    while sum_at(hi) < 1.0 {
        hi *= 2.0;
        grow_steps += 1;
        if grow_steps > 200 {
            return Err(OptimizerError::NotConverged {
                iterations: grow_steps,
                bracket_lo: lo,
                bracket_hi: hi,
                sum: sum_at(hi),
            });
        }
    }
    let mut iterations = 0usize;
    let mut nu = hi;
    let mut sum = sum_at(nu);
    while (sum - 1.0).abs() > ATTENTION_SUM_TOL {
        if iterations >= BISECTION_MAX_ITERS {
            return Err(OptimizerError::NotConverged {
                iterations,
                bracket_lo: lo,
                bracket_hi: hi,
                sum,
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // The bracket is two adjacent floats: ν has run out of
            // resolution. Project the upper endpoint onto the simplex.
            if (sum - 1.0).abs() < 1e-3 {
                let alpha = problem.attention_at(nu).iter().map(|a| a / sum).collect();
                return Ok(SeAllocation {
                    alpha,
                    nu,
                    iterations,
                });
            }
            return Err(OptimizerError::NotConverged {
                iterations,
                bracket_lo: lo,
                bracket_hi: hi,
                sum,
            });
        }
        if sum_at(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        nu = hi;
        sum = sum_at(nu);
        iterations += 1;
    }
    Ok(SeAllocation {
        alpha: problem.attention_at(nu),
        nu,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Sensing-optimal attention
// ---------------------------------------------------------------------------

/// Per-band coefficients of the sensing allocation problem: minimize
/// Σ (floorₙ + ξₙ/αₙ) over the simplex, where ξₙ/αₙ is the shot-noise part
/// of band n's normalized Cramér-Rao bound and floorₙ the α-independent
/// blackbody part.
#[derive(Debug, Clone)]
pub struct SenseAllocationProblem {
    xi: Vec<f64>,
    floor: Vec<f64>,
}

impl SenseAllocationProblem {
    /// Validates the coefficients: equal nonzero lengths, ξₙ > 0, floorₙ ≥ 0.
    pub fn new(xi: Vec<f64>, floor: Vec<f64>) -> Result<Self, OptimizerError> {
        if xi.is_empty() || xi.len() != floor.len() {
            return Err(OptimizerError::InvalidProblem {
                msg: format!(
                    "coefficient lengths must match and be nonzero (xi {}, floor {})",
                    xi.len(),
                    floor.len()
                ),
            });
        }
        if xi.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(OptimizerError::InvalidProblem {
                msg: format!("xi entries must be positive and finite: {xi:?}"),
            });
        }
        if floor.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(OptimizerError::InvalidProblem {
                msg: format!("floor entries must be nonnegative and finite: {floor:?}"),
            });
        }
        Ok(SenseAllocationProblem { xi, floor })
    }

    /// Number of bands.
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    /// True when the problem has no bands (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Shot-noise coefficients ξₙ.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// α-independent bound floors.
    pub fn floor(&self) -> &[f64] {
        &self.floor
    }
}

/// Sensing-optimal attention α★ₙ = √ξₙ/Σ√ξₘ (closed form; scale-free in ξ).
pub fn optimal_attention_sensing(problem: &SenseAllocationProblem) -> Vec<f64> {
    let roots: Vec<f64> = problem.xi.iter().map(|x| x.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    roots.iter().map(|r| r / total).collect()
}

/// Normalized Cramér-Rao bound of one band: floorₙ + ξₙ/αₙ (dimensionless,
/// normalized by the displacement prior variance). An unattended band
/// (αₙ ≤ 0) cannot be sensed at all: the bound is the infinity sentinel.
pub fn ncrlb(alpha_n: f64, xi_n: f64, floor_n: f64) -> f64 {
    if alpha_n <= 0.0 {
        return f64::INFINITY;
    }
    floor_n + xi_n / alpha_n
}
