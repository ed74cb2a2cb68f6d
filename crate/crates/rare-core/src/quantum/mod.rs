//! (N+3)-level atomic dynamics.
//!
//! The receiver's atom couples a ground state (level 1), an excited state
//! (level 2), and a ladder of Rydberg states: level 3 is reached by the
//! coupling laser, and levels 3+n (n = 1..N) are reached from level 3 by the
//! N RF fields. The density matrix ρ evolves under a Lindblad master
//! equation whose Hamiltonian has an arrow sparsity structure — probe Ωₚ on
//! (1,2), coupling Ω_c on (2,3), and the RF Rabi frequencies Ωₙ on
//! (3, 3+n) — plus a relaxation operator dominated by the excited-state
//! decay γ₂.
//!
//! Submodules:
//! - [`lindblad`]: the master-equation right-hand side, exploiting the
//!   arrow structure for O(dim²) evaluation;
//! - [`steady`]: steady-state solutions — the exact 5×5 closed form for two
//!   bands, the sum-square coherence formula for any N, and a constrained
//!   superoperator solve;
//! - [`rk4`]: fixed-step 4th-order Runge-Kutta time evolution with
//!   physicality corrections.

use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

use crate::scenario::AtomScenario;

pub mod lindblad;
pub mod rk4;
pub mod steady;

pub use lindblad::{lindblad_rhs, lindblad_rhs_matrix, RelaxationModel};
pub use rk4::{evolve_rk4, evolve_rk4_sampled, Rk4Trajectory};
pub use steady::{rho12_steady, steady_state_closed_form_n2, steady_state_numeric};

/// Complex matrix alias used throughout the quantum solvers.
pub type CMatrix = DMatrix<Complex<f64>>;

/// Elementwise Hermiticity tolerance |ρ − ρ†| for a valid density matrix.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Unit-trace tolerance |Tr ρ − 1| for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-10;

/// Positive-semidefiniteness tolerance: min eigenvalue ≥ −[`PSD_TOL`].
pub const PSD_TOL: f64 = 1e-9;

/// Errors from the quantum solvers.
#[derive(Debug, Error)]
pub enum QuantumError {
    /// A density matrix failed the Hermiticity invariant.
    #[error("density matrix is not Hermitian: max |rho - rho^H| element is {max_dev:e}")]
    NonHermitian { max_dev: f64 },
    /// A density matrix failed the unit-trace invariant.
    #[error("density matrix trace {trace} deviates from 1 by more than {TRACE_TOL:e}")]
    TraceDeviation { trace: f64 },
    /// A density matrix failed the positivity invariant.
    #[error("density matrix has min eigenvalue {min_eig:e} below -{PSD_TOL:e}")]
    NotPositiveSemidefinite { min_eig: f64 },
    /// A Rabi vector entry was negative or non-finite.
    #[error("Rabi frequency {value} at index {index} must be a nonnegative finite magnitude")]
    InvalidRabi { index: usize, value: f64 },
    /// A Rabi vector must address at least one band.
    #[error("Rabi vector must have at least one band")]
    EmptyRabi,
    /// Dimensions of two quantum objects disagree.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    /// The closed-form 5×5 solution divides by ΣΩₙ²; it does not exist at
    /// zero RF drive (the coherence-only path remains valid there).
    #[error("closed-form steady state is degenerate at zero RF drive (sum-square = 0)")]
    DegenerateDrive,
    /// The steady state is not unique even after pinning the conserved
    /// RF-dark charges; reported rather than silently regularized.
    #[error("steady state is not unique: {detail}")]
    SingularSteadyState { detail: String },
    /// The steady-state solve produced an unacceptable residual.
    #[error("steady-state residual {residual:e} exceeds {tol:e} (gamma2-normalized system)")]
    ResidualTooLarge { residual: f64, tol: f64 },
    /// The integrator step violates the stability guard.
    #[error("RK4 step {dt:e} s exceeds the stability guard {dt_max:e} s at t = {t:e} s")]
    StepTooLarge { dt: f64, dt_max: f64, t: f64 },
    /// The integrator hit the divergence sentinel.
    #[error("RK4 diverged at t = {t:e} s: matrix element magnitude {max_abs:e} exceeds 10")]
    Diverged { t: f64, max_abs: f64 },
    /// The relaxation model's per-band decay list does not match the drive.
    #[error("relaxation model lists {got} RF decay rates but the drive has {expected} bands")]
    RelaxationMismatch { expected: usize, got: usize },
}

// ---------------------------------------------------------------------------
// RabiVector
// ---------------------------------------------------------------------------

/// Instantaneous RF Rabi magnitudes Ωₙ (rad/s), one per band.
///
/// Each entry is the magnitude |Ω_r,n + Ω_s,n·e^{j(δₙt+φₙ)}| of the
/// reference-plus-signal beat; magnitudes are nonnegative by definition.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiVector(Vec<f64>);

impl RabiVector {
    /// Validates nonnegative, finite magnitudes; at least one band.
    pub fn new(omega: Vec<f64>) -> Result<Self, QuantumError> {
        if omega.is_empty() {
            return Err(QuantumError::EmptyRabi);
        }
        for (index, &value) in omega.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(QuantumError::InvalidRabi { index, value });
            }
        }
        Ok(RabiVector(omega))
    }

    /// Number of RF bands N.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when the vector has no bands (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The magnitudes as a slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sum square ΣΩₙ² ((rad/s)²) — the quantity the steady-state coherence
    /// actually responds to.
    pub fn sum_square(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum()
    }
}

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

/// The arrow-structured (N+3)×(N+3) interaction Hamiltonian.
///
/// Stored by its generating Rabi frequencies; the matrix entries are in
/// units of (ħ/2)·(rad/s), i.e. H = (ħ/2)·M with M real symmetric,
/// M[1,2] = Ωₚ, M[2,3] = Ω_c, M[3,3+n] = Ωₙ (1-based), zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    omega_p: f64,
    omega_c: f64,
    omega_rf: Vec<f64>,
}

impl Hamiltonian {
    /// Builds from raw Rabi frequencies (rad/s). The RF list must be
    /// nonempty; magnitudes may be zero.
    pub fn new(omega_p: f64, omega_c: f64, omega_rf: Vec<f64>) -> Result<Self, QuantumError> {
        if omega_rf.is_empty() {
            return Err(QuantumError::EmptyRabi);
        }
        Ok(Hamiltonian {
            omega_p,
            omega_c,
            omega_rf,
        })
    }

    /// Matrix dimension N+3.
    pub fn dim(&self) -> usize {
        self.omega_rf.len() + 3
    }

    /// Number of RF bands N.
    pub fn n_bands(&self) -> usize {
        self.omega_rf.len()
    }

    /// Probe Rabi frequency Ωₚ (rad/s).
    pub fn omega_p(&self) -> f64 {
        self.omega_p
    }

    /// Coupling Rabi frequency Ω_c (rad/s).
    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    /// RF Rabi frequencies Ωₙ (rad/s).
    pub fn omega_rf(&self) -> &[f64] {
        &self.omega_rf
    }

    /// Dense M = (2/ħ)·H (rad/s): real symmetric arrow matrix, for tests
    /// and reference computations. The solvers use the structure directly.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        m[(0, 1)] = self.omega_p;
        m[(1, 0)] = self.omega_p;
        m[(1, 2)] = self.omega_c;
        m[(2, 1)] = self.omega_c;
        for (n, &w) in self.omega_rf.iter().enumerate() {
            m[(2, 3 + n)] = w;
            m[(3 + n, 2)] = w;
        }
        m
    }
}

/// Builds the interaction Hamiltonian for the scenario's lasers and the
/// given instantaneous RF Rabi magnitudes.
pub fn build_hamiltonian(s: &AtomScenario, omega: &RabiVector) -> Hamiltonian {
    Hamiltonian {
        omega_p: s.omega_p_rabi(),
        omega_c: s.omega_c_rabi(),
        omega_rf: omega.as_slice().to_vec(),
    }
}

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// A validated (N+3)×(N+3) density matrix: Hermitian within
/// [`HERMITICITY_TOL`], unit trace within [`TRACE_TOL`], positive
/// semidefinite within [`PSD_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    /// Validates all three invariants, naming the violated one.
    pub fn try_new(rho: CMatrix) -> Result<Self, QuantumError> {
        let d = rho.nrows();
        if rho.ncols() != d {
            return Err(QuantumError::DimensionMismatch {
                expected: d,
                got: rho.ncols(),
                context: "density matrix must be square",
            });
        }
        if d < 4 {
            return Err(QuantumError::DimensionMismatch {
                expected: 4,
                got: d,
                context: "density matrix must cover at least N+3 = 4 levels",
            });
        }
        let mut max_dev = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                let dev = (rho[(i, j)] - rho[(j, i)].conj()).norm();
                max_dev = max_dev.max(dev);
            }
        }
        if max_dev > HERMITICITY_TOL {
            return Err(QuantumError::NonHermitian { max_dev });
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(QuantumError::TraceDeviation { trace: trace.re });
        }
        check_psd(&rho)?;
        Ok(DensityMatrix { rho })
    }

    /// The all-ground preparation diag(1, 0, …, 0) — the physical state
    /// before the lasers switch on.
    pub fn ground(dim: usize) -> Self {
        assert!(dim >= 4, "density matrix needs at least 4 levels, got {dim}");
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(0, 0)] = Complex::new(1.0, 0.0);
        DensityMatrix { rho }
    }

    /// Matrix dimension N+3.
    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Borrow the underlying matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    /// Consume into the underlying matrix.
    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    /// The probe coherence ρ₁₂ (1-based), which sets the probe absorption.
    pub fn rho12(&self) -> Complex<f64> {
        self.rho[(0, 1)]
    }
}

/// PSD check by exact Hermitian eigendecomposition. (A Cholesky-with-shift
/// fast path is tempting but unsound here: the complex Cholesky does not
/// reliably reject indefinite matrices, so the eigenvalues are computed
/// outright — dimensions stay small enough that this is cheap.)
fn check_psd(rho: &CMatrix) -> Result<(), QuantumError> {
    let d = rho.nrows();
    // The eigensolver needs an exactly Hermitian input; the caller has
    // already bounded the asymmetry by HERMITICITY_TOL.
    let mut herm = rho.clone();
    for i in 0..d {
        herm[(i, i)] = Complex::new(herm[(i, i)].re, 0.0);
        for j in 0..i {
            let sym = 0.5 * (herm[(i, j)] + herm[(j, i)].conj());
            herm[(i, j)] = sym;
            herm[(j, i)] = sym.conj();
        }
    }
    let min_eig = herm
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &e| acc.min(e));
    if min_eig < -PSD_TOL {
        return Err(QuantumError::NotPositiveSemidefinite { min_eig });
    }
    Ok(())
}
