//! Master-equation right-hand side.
//!
//! With the Hamiltonian written H = (ħ/2)·M (M the real symmetric arrow
//! matrix of Rabi frequencies), the resonant-frame master equation is
//!
//!   dρ/dt = (j/2)(ρM − Mρ) + ℒ(ρ)
//!
//! where ℒ is the relaxation operator. The default *simplified* ℒ keeps
//! only the dominant excited-state decay γ₂ (level 2 → ground): it adds
//! +γ₂ρ₂₂ at (1,1), −γ₂ρ₂₂ at (2,2), and damps every row-2/col-2 coherence
//! at γ₂/2. The *full* model adds the slower Rydberg decays (level 3 → 2 at
//! γ₃, level 3+n → ground at γ_{RF,n}) in the same jump-operator form, and
//! reduces exactly to the simplified model when those rates are zero.
//!
//! Both Hamiltonian products exploit the arrow structure: ρM fills column c
//! from the few rows M couples into c, and Mρ fills row r likewise, giving
//! O(dim²) evaluation instead of O(dim³). The raw-matrix entry point
//! [`lindblad_rhs_matrix`] deliberately accepts non-Hermitian input — the
//! steady-state superoperator is assembled by applying it to (non-Hermitian)
//! elementary basis matrices — so both products are computed independently
//! rather than via the adjoint shortcut.

use num_complex::Complex;

use super::{CMatrix, DensityMatrix, Hamiltonian, QuantumError};

/// Incoherent relaxation model.
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationModel {
    /// Only the excited-state decay γ₂ (rad/s) — the regime where γ₂
    /// exceeds every Rydberg decay by orders of magnitude, and the model
    /// under which the closed-form steady states hold.
    Simplified { gamma2: f64 },
    /// Per-level decays: γ₂ (level 2 → 1), γ₃ (level 3 → 2), and
    /// γ_{RF,n} (level 3+n → 1), all rad/s. A sensitivity switch: the
    /// simplified model is the documented default.
    Full {
        gamma2: f64,
        gamma3: f64,
        gamma_rf: Vec<f64>,
    },
}

impl RelaxationModel {
    /// The excited-state decay rate (rad/s).
    pub fn gamma2(&self) -> f64 {
        match self {
            RelaxationModel::Simplified { gamma2 } => *gamma2,
            RelaxationModel::Full { gamma2, .. } => *gamma2,
        }
    }

    /// Total decay rate out of 0-based level `i` for a system of `dim`
    /// levels (index 0 = ground, 1 = excited, 2 = first Rydberg,
    /// 3+n = RF-coupled Rydberg).
    fn level_decay(&self, i: usize) -> f64 {
        match self {
            RelaxationModel::Simplified { gamma2 } => {
                if i == 1 {
                    *gamma2
                } else {
                    0.0
                }
            }
            RelaxationModel::Full {
                gamma2,
                gamma3,
                gamma_rf,
            } => match i {
                0 => 0.0,
                1 => *gamma2,
                2 => *gamma3,
                _ => gamma_rf[i - 3],
            },
        }
    }

    /// Per-band RF decay rates, if the model tracks them.
    pub(crate) fn gamma_rf(&self) -> Option<&[f64]> {
        match self {
            RelaxationModel::Simplified { .. } => None,
            RelaxationModel::Full { gamma_rf, .. } => Some(gamma_rf),
        }
    }

    fn check_dim(&self, n_bands: usize) -> Result<(), QuantumError> {
        if let RelaxationModel::Full { gamma_rf, .. } = self {
            if gamma_rf.len() != n_bands {
                return Err(QuantumError::RelaxationMismatch {
                    expected: n_bands,
                    got: gamma_rf.len(),
                });
            }
        }
        Ok(())
    }
}

/// dρ/dt for a validated density matrix under the simplified relaxation
/// model — the default configuration of the receiver.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Hamiltonian, gamma2: f64) -> Result<CMatrix, QuantumError> {
    lindblad_rhs_matrix(rho.matrix(), h, &RelaxationModel::Simplified { gamma2 })
}

/// dρ/dt on a raw complex matrix under any relaxation model.
///
/// Accepts non-Hermitian input (needed to assemble the superoperator from
/// elementary basis matrices); for Hermitian input the output is Hermitian
/// to the last bit, because corresponding entries of ρM and Mρ are computed
/// by conjugate-identical arithmetic.
pub fn lindblad_rhs_matrix(
    rho: &CMatrix,
    h: &Hamiltonian,
    relax: &RelaxationModel,
) -> Result<CMatrix, QuantumError> {
    let d = h.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(QuantumError::DimensionMismatch {
            expected: d,
            got: rho.nrows(),
            context: "density matrix vs Hamiltonian",
        });
    }
    relax.check_dim(h.n_bands())?;

    let wp = h.omega_p();
    let wc = h.omega_c();
    let wrf = h.omega_rf();

    // rho*M by columns of M; M*rho by rows of M.
    let mut rho_m = CMatrix::zeros(d, d);
    let mut m_rho = CMatrix::zeros(d, d);
    for i in 0..d {
        rho_m[(i, 0)] = rho[(i, 1)] * wp;
        rho_m[(i, 1)] = rho[(i, 0)] * wp + rho[(i, 2)] * wc;
        let mut acc = rho[(i, 1)] * wc;
        for (n, &w) in wrf.iter().enumerate() {
            acc += rho[(i, 3 + n)] * w;
            rho_m[(i, 3 + n)] = rho[(i, 2)] * w;
        }
        rho_m[(i, 2)] = acc;
    }
    for j in 0..d {
        m_rho[(0, j)] = rho[(1, j)] * wp;
        m_rho[(1, j)] = rho[(0, j)] * wp + rho[(2, j)] * wc;
        let mut acc = rho[(1, j)] * wc;
        for (n, &w) in wrf.iter().enumerate() {
            acc += rho[(3 + n, j)] * w;
            m_rho[(3 + n, j)] = rho[(2, j)] * w;
        }
        m_rho[(2, j)] = acc;
    }

    let half_j = Complex::new(0.0, 0.5);
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        let gi = relax.level_decay(i);
        for j in 0..d {
            let gj = relax.level_decay(j);
            out[(i, j)] =
                half_j * (rho_m[(i, j)] - m_rho[(i, j)]) - 0.5 * (gi + gj) * rho[(i, j)];
        }
    }
    // Population feeds from the jump operators.
    match relax {
        RelaxationModel::Simplified { gamma2 } => {
            out[(0, 0)] += *gamma2 * rho[(1, 1)];
        }
        RelaxationModel::Full {
            gamma2,
            gamma3,
            gamma_rf,
        } => {
            out[(0, 0)] += *gamma2 * rho[(1, 1)];
            out[(1, 1)] += *gamma3 * rho[(2, 2)];
            for (n, &g) in gamma_rf.iter().enumerate() {
                out[(0, 0)] += g * rho[(3 + n, 3 + n)];
            }
        }
    }
    Ok(out)
}
