//! Steady-state solutions of the master equation.
//!
//! Three routes, used to cross-validate each other:
//!
//! 1. [`rho12_steady`] — the exact probe coherence for any band count N:
//!    ρ₁₂ = j·ρ₀·S/(S + Γ²) with S = ΣΩₙ². All bands act through their
//!    Rabi sum-square only.
//! 2. [`steady_state_closed_form_n2`] — the full 5×5 closed form for N = 2
//!    (the only case with a published full matrix).
//! 3. [`steady_state_numeric`] — a constrained linear solve of the
//!    vectorized master equation for any N.
//!
//! The numeric route needs care: under the simplified relaxation model the
//! RF-coupled Rydberg levels carry no decay, so the component of the drive
//! space orthogonal to the Rabi vector — the *RF-dark* subspace — is
//! dynamically conserved. For N ≥ 2 the raw steady-state system is
//! therefore singular (a 1 + (N−1)²-dimensional solution manifold), and a
//! trace row alone cannot fix it. Physically the receiver starts in the
//! ground state, whose dark charges are zero and stay zero; the solver pins
//! ⟨Dᵢ|ρ|Dⱼ⟩ = 0 for an orthonormal dark basis {Dᵢ}, which restores
//! uniqueness and reproduces the closed forms to machine precision.
//! Genuinely non-unique cases (zero RF drive, which leaves the
//! probe/coupling dark state unrelaxed) are reported as errors rather than
//! silently regularized.

use nalgebra::DVector;
use num_complex::Complex;

use crate::scenario::{derive_constants, AtomScenario};

use super::{
    build_hamiltonian, lindblad_rhs_matrix, CMatrix, DensityMatrix, QuantumError, RabiVector,
    RelaxationModel,
};

/// Max acceptable residual of the steady-state solution, measured on the
/// γ₂-normalized master equation (entries are order-1 there).
pub const STEADY_RESIDUAL_TOL: f64 = 1e-8;

/// Relative rank threshold below which the constrained system is declared
/// singular (ratio of smallest to largest pivot of the full-pivot LU).
const PIVOT_RATIO_TOL: f64 = 1e-10;

/// Exact steady-state probe coherence ρ₁₂ for any N:
/// j·ρ₀·ΣΩₙ²/(ΣΩₙ² + Γ²). Purely imaginary with nonnegative imaginary
/// part, saturating at ρ₀ as the drive grows.
pub fn rho12_steady(s: &AtomScenario, omega: &RabiVector) -> Complex<f64> {
    let derived = derive_constants(s);
    let sum_sq = omega.sum_square();
    Complex::new(0.0, derived.rho0 * sum_sq / (sum_sq + derived.big_gamma_sq))
}

/// Full 5×5 closed-form steady state for N = 2.
///
/// Every entry is a ratio of monomials in (Ωₚ, Ω_c, γ₂, Ω₁, Ω₂) over the
/// common denominator D = (γ₂²+2Ωₚ²)S + 2Ωₚ²(Ω_c²+Ωₚ²); the diagonal sums
/// to D/D = 1 identically. The Rydberg-block entries divide by S = Ω₁²+Ω₂²,
/// so the full matrix does not exist at zero RF drive (the coherence-only
/// route [`rho12_steady`] stays valid there and returns 0).
pub fn steady_state_closed_form_n2(
    s: &AtomScenario,
    omega: &RabiVector,
) -> Result<DensityMatrix, QuantumError> {
    if omega.len() != 2 {
        return Err(QuantumError::DimensionMismatch {
            expected: 2,
            got: omega.len(),
            context: "the full closed form is published only for two bands",
        });
    }
    let (w1, w2) = (omega.as_slice()[0], omega.as_slice()[1]);
    let sum_sq = w1 * w1 + w2 * w2;
    if sum_sq == 0.0 {
        return Err(QuantumError::DegenerateDrive);
    }
    let wp = s.omega_p_rabi();
    let wc = s.omega_c_rabi();
    let g2 = s.gamma2();
    let wp2 = wp * wp;
    let wc2 = wc * wc;
    let g22 = g2 * g2;
    let denom = (g22 + 2.0 * wp2) * sum_sq + 2.0 * wp2 * (wc2 + wp2);

    let re = |x: f64| Complex::new(x, 0.0);
    let im = |x: f64| Complex::new(0.0, x);
    let mut rho = CMatrix::zeros(5, 5);
    rho[(0, 0)] = re(((wp2 + g22) * sum_sq + wc2 * wp2) / denom);
    rho[(0, 1)] = im(g2 * wp * sum_sq / denom);
    rho[(0, 2)] = re(-wc * wp2 * wp / denom);
    rho[(0, 3)] = im(-g2 * w1 * wc * wp / denom);
    rho[(0, 4)] = im(-g2 * w2 * wc * wp / denom);
    rho[(1, 1)] = re(wp2 * sum_sq / denom);
    rho[(1, 3)] = re(-w1 * wc * wp2 / denom);
    rho[(1, 4)] = re(-w2 * wc * wp2 / denom);
    rho[(2, 2)] = re(wp2 * wp2 / denom);
    rho[(3, 3)] = re(w1 * w1 * wp2 * (wp2 + wc2) / (denom * sum_sq));
    rho[(3, 4)] = re(w1 * w2 * wp2 * (wp2 + wc2) / (denom * sum_sq));
    rho[(4, 4)] = re(w2 * w2 * wp2 * (wp2 + wc2) / (denom * sum_sq));
    // rho23, rho34, rho35 vanish identically; fill the lower triangle.
    for i in 0..5 {
        for j in 0..i {
            rho[(i, j)] = rho[(j, i)].conj();
        }
    }
    DensityMatrix::try_new(rho)
}

/// Steady state by constrained linear solve, simplified relaxation model.
pub fn steady_state_numeric(
    s: &AtomScenario,
    omega: &RabiVector,
) -> Result<DensityMatrix, QuantumError> {
    steady_state_numeric_with(s, omega, &RelaxationModel::Simplified { gamma2: s.gamma2() })
}

/// Steady state by constrained linear solve under any relaxation model.
///
/// Builds the (N+3)²×(N+3)² superoperator column by column (applying the
/// master-equation right-hand side to elementary basis matrices), divides
/// by γ₂ for conditioning, replaces the redundant ground-population row
/// with the trace constraint, pins the conserved RF-dark charges to zero,
/// and solves by full-pivot LU. The solution is verified against the
/// *unmodified* master equation plus all constraints before being returned.
pub fn steady_state_numeric_with(
    s: &AtomScenario,
    omega: &RabiVector,
    relax: &RelaxationModel,
) -> Result<DensityMatrix, QuantumError> {
    let n = omega.len();
    let d = n + 3;
    let dd = d * d;
    let h = build_hamiltonian(s, omega);
    let gamma2 = relax.gamma2();

    // Superoperator over row-major vec(rho), normalized by gamma2.
    let mut sup = CMatrix::zeros(dd, dd);
    let mut basis = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            basis[(a, b)] = Complex::new(1.0, 0.0);
            let col = lindblad_rhs_matrix(&basis, &h, relax)?;
            basis[(a, b)] = Complex::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    sup[(i * d + j, a * d + b)] = col[(i, j)] / gamma2;
                }
            }
        }
    }

    let mut rhs = DVector::from_element(dd, Complex::new(0.0, 0.0));
    // The d diagonal rows sum to zero (trace conservation), so the ground
    // population row is redundant; replace it with Tr rho = 1.
    for col in 0..dd {
        sup[(0, col)] = Complex::new(0.0, 0.0);
    }
    for i in 0..d {
        sup[(0, i * d + i)] = Complex::new(1.0, 0.0);
    }
    rhs[0] = Complex::new(1.0, 0.0);

    // Pin the conserved dark charges.
    let (darks, replace_coords) = dark_basis(omega.as_slice(), relax);
    let support: Vec<usize> = support_coords(omega.len(), relax);
    for (i, di) in darks.iter().enumerate() {
        for (j, dj) in darks.iter().enumerate() {
            let row = (3 + replace_coords[i]) * d + (3 + replace_coords[j]);
            for col in 0..dd {
                sup[(row, col)] = Complex::new(0.0, 0.0);
            }
            for (a_local, &a) in support.iter().enumerate() {
                for (b_local, &b) in support.iter().enumerate() {
                    sup[(row, (3 + a) * d + (3 + b))] =
                        Complex::new(di[a_local] * dj[b_local], 0.0);
                }
            }
            rhs[row] = Complex::new(0.0, 0.0);
        }
    }

    let lu = sup.full_piv_lu();
    let pivots: Vec<f64> = (0..dd).map(|i| lu.u()[(i, i)].norm()).collect();
    let pivot_max = pivots.iter().fold(0.0_f64, |a, &b| a.max(b));
    let pivot_min = pivots.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    // Written as a negated `>` so a NaN pivot (which compares false both
    // ways) also lands in the singular branch.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(pivot_min > PIVOT_RATIO_TOL * pivot_max) {
        return Err(QuantumError::SingularSteadyState {
            detail: format!(
                "constrained superoperator pivot ratio {:e} below {PIVOT_RATIO_TOL:e} \
                 (typically zero RF drive: the probe/coupling dark state never relaxes)",
                pivot_min / pivot_max
            ),
        });
    }
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| QuantumError::SingularSteadyState {
            detail: "full-pivot LU refused to solve the constrained system".to_string(),
        })?;

    let mut rho_raw = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            rho_raw[(i, j)] = x[i * d + j];
        }
    }

    // Verify against the unmodified physics before any cosmetic projection:
    // master-equation residual (gamma2-normalized), trace, dark charges.
    let mut residual = lindblad_rhs_matrix(&rho_raw, &h, relax)?
        .iter()
        .map(|c| c.norm() / gamma2)
        .fold(0.0_f64, f64::max);
    residual = residual.max((rho_raw.trace() - Complex::new(1.0, 0.0)).norm());
    for di in &darks {
        for dj in &darks {
            let mut charge = Complex::new(0.0, 0.0);
            for (a_local, &a) in support.iter().enumerate() {
                for (b_local, &b) in support.iter().enumerate() {
                    charge += rho_raw[(3 + a, 3 + b)] * di[a_local] * dj[b_local];
                }
            }
            residual = residual.max(charge.norm());
        }
    }
    if residual > STEADY_RESIDUAL_TOL {
        return Err(QuantumError::ResidualTooLarge {
            residual,
            tol: STEADY_RESIDUAL_TOL,
        });
    }

    // Project out solver roundoff asymmetry (order 1e-15) and validate.
    let rho = (&rho_raw + rho_raw.adjoint()) * Complex::new(0.5, 0.0);
    DensityMatrix::try_new(rho)
}

/// RF coordinates whose levels carry no decay — the candidates for
/// conserved dark components.
fn support_coords(n: usize, relax: &RelaxationModel) -> Vec<usize> {
    match relax.gamma_rf() {
        None => (0..n).collect(),
        Some(rates) => (0..n).filter(|&i| rates[i] == 0.0).collect(),
    }
}

/// Orthonormal basis of the RF-dark subspace (the orthogonal complement of
/// the Rabi vector within the undecaying RF coordinates), together with the
/// coordinate per basis vector whose superoperator row the pinning
/// constraint may safely replace.
///
/// The basis comes from the Householder reflection exchanging the unit
/// Rabi direction with the *largest-magnitude* coordinate axis e_p: the
/// remaining columns span the complement, and the minor of those columns on
/// the rows other than p has determinant ±u_p ≠ 0, so the replacement rows
/// are guaranteed independent. (Pivoting on the largest component keeps
/// that minor well conditioned even when some Rabi entries are zero.)
fn dark_basis(omega: &[f64], relax: &RelaxationModel) -> (Vec<Vec<f64>>, Vec<usize>) {
    let support = support_coords(omega.len(), relax);
    let m = support.len();
    if m == 0 {
        return (Vec::new(), Vec::new());
    }
    let w: Vec<f64> = support.iter().map(|&i| omega[i]).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Fully undriven dark block: every coordinate axis is dark, and the
        // corresponding superoperator rows are identically zero.
        let basis = (0..m)
            .map(|k| {
                let mut v = vec![0.0; m];
                v[k] = 1.0;
                v
            })
            .collect();
        return (basis, support);
    }
    if m == 1 {
        return (Vec::new(), Vec::new());
    }
    let u: Vec<f64> = w.iter().map(|x| x / norm).collect();
    let p = u
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite Rabi"))
        .expect("nonempty support")
        .0;
    let mut v = u.clone();
    v[p] += if u[p] >= 0.0 { 1.0 } else { -1.0 };
    let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= vnorm;
    }
    // Columns k != p of Q = I - 2vv^T.
    let mut basis = Vec::with_capacity(m - 1);
    let mut coords = Vec::with_capacity(m - 1);
    for k in 0..m {
        if k == p {
            continue;
        }
        let col: Vec<f64> = (0..m)
            .map(|r| (if r == k { 1.0 } else { 0.0 }) - 2.0 * v[r] * v[k])
            .collect();
        basis.push(col);
        coords.push(support[k]);
    }
    (basis, coords)
}
