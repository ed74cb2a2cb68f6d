//! Fixed-step 4th-order Runge-Kutta evolution of the master equation.
//!
//! The integrator rebuilds the Hamiltonian from the time-varying drive at
//! every stage time, so amplitude-modulated RF fields are handled exactly
//! up to the RK4 truncation order. Two guards keep long runs honest:
//!
//! - a stability guard dt ≤ 0.01/max(Ωₚ, Ω_c, γ₂, maxₙΩₙ(t)), rejecting
//!   steps too coarse for the fastest rate in play;
//! - a divergence sentinel aborting when any matrix element magnitude
//!   exceeds 10 (a valid density matrix never leaves the unit ball).
//!
//! After every step the state is projected back onto the physical manifold
//! (Hermitian symmetrization and trace renormalization); the worst
//! pre-correction drift of both kinds is recorded on the trajectory so
//! callers can see how hard the corrections worked.

use num_complex::Complex;

use crate::scenario::AtomScenario;

use super::{
    build_hamiltonian, lindblad_rhs_matrix, DensityMatrix, Hamiltonian, QuantumError,
    RabiVector, RelaxationModel,
};

/// Stability-guard coefficient: dt must not exceed this fraction of the
/// fastest rate's period-equivalent 1/rate.
pub const STEP_GUARD: f64 = 0.01;

/// Divergence sentinel on matrix element magnitude.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

/// A sampled RK4 trajectory.
#[derive(Debug, Clone)]
pub struct Rk4Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    hermiticity_drift: f64,
    trace_drift: f64,
    steps: usize,
}

impl Rk4Trajectory {
    /// Sample times (s), starting at 0 and ending at t_end.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Sampled states, aligned with [`Rk4Trajectory::times`].
    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// The state at t_end.
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory always holds the initial sample")
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when no samples are held (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Worst pre-correction Hermiticity asymmetry max|ρ − ρ†| over all steps.
    pub fn hermiticity_drift(&self) -> f64 {
        self.hermiticity_drift
    }

    /// Worst pre-correction trace deviation |Tr ρ − 1| over all steps.
    pub fn trace_drift(&self) -> f64 {
        self.trace_drift
    }

    /// Total integration steps taken.
    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Evolves under the scenario's lasers and the simplified relaxation model,
/// recording every step.
pub fn evolve_rk4<F>(
    s: &AtomScenario,
    drive: F,
    rho_init: &DensityMatrix,
    dt: f64,
    t_end: f64,
) -> Result<Rk4Trajectory, QuantumError>
where
    F: FnMut(f64) -> RabiVector,
{
    evolve_rk4_sampled(
        s,
        drive,
        rho_init,
        dt,
        t_end,
        1,
        &RelaxationModel::Simplified { gamma2: s.gamma2() },
    )
}

/// Evolves under the scenario's lasers, recording every `record_every`-th
/// step (the initial and final states are always recorded).
pub fn evolve_rk4_sampled<F>(
    s: &AtomScenario,
    mut drive: F,
    rho_init: &DensityMatrix,
    dt: f64,
    t_end: f64,
    record_every: usize,
    relax: &RelaxationModel,
) -> Result<Rk4Trajectory, QuantumError>
where
    F: FnMut(f64) -> RabiVector,
{
    let h_of_t = move |t: f64| build_hamiltonian(s, &drive(t));
    evolve_rk4_hamiltonian(h_of_t, relax, rho_init, dt, t_end, record_every)
}

/// The integration engine, parameterized directly by a Hamiltonian builder
/// (lets tests drive edge cases a validated scenario cannot express, such
/// as a fully switched-off laser system).
pub fn evolve_rk4_hamiltonian<F>(
    mut h_of_t: F,
    relax: &RelaxationModel,
    rho_init: &DensityMatrix,
    dt: f64,
    t_end: f64,
    record_every: usize,
) -> Result<Rk4Trajectory, QuantumError>
where
    F: FnMut(f64) -> Hamiltonian,
{
    assert!(dt.is_finite() && dt > 0.0, "step must be positive and finite, got {dt}");
    assert!(
        t_end.is_finite() && t_end > 0.0,
        "integration horizon must be positive and finite, got {t_end}"
    );
    assert!(record_every >= 1, "record_every must be at least 1, got {record_every}");

    let gamma2 = relax.gamma2();
    let n_steps = (t_end / dt).ceil() as usize;
    let mut rho = rho_init.matrix().clone();
    let d = rho.nrows();

    let mut trajectory = Rk4Trajectory {
        times: Vec::with_capacity(n_steps / record_every + 2),
        states: Vec::with_capacity(n_steps / record_every + 2),
        hermiticity_drift: 0.0,
        trace_drift: 0.0,
        steps: 0,
    };
    trajectory.times.push(0.0);
    trajectory.states.push(rho_init.clone());

    let mut guarded_h = |t: f64, step: f64| -> Result<Hamiltonian, QuantumError> {
        let h = h_of_t(t);
        if h.dim() != d {
            return Err(QuantumError::DimensionMismatch {
                expected: d,
                got: h.dim(),
                context: "drive dimension changed during evolution",
            });
        }
        let mut rate = h.omega_p().abs().max(h.omega_c().abs()).max(gamma2.abs());
        for &w in h.omega_rf() {
            rate = rate.max(w.abs());
        }
        let dt_max = STEP_GUARD / rate;
        if step > dt_max {
            return Err(QuantumError::StepTooLarge { dt: step, dt_max, t });
        }
        Ok(h)
    };

    let mut t = 0.0_f64;
    for step_idx in 1..=n_steps {
        // The last step may be shorter so the trajectory lands exactly on t_end.
        let step = if step_idx == n_steps { t_end - t } else { dt };

        let h1 = guarded_h(t, step)?;
        let h2 = guarded_h(t + 0.5 * step, step)?;
        let h4 = guarded_h(t + step, step)?;

        let k1 = lindblad_rhs_matrix(&rho, &h1, relax)?;
        let stage2 = &rho + &k1 * Complex::new(0.5 * step, 0.0);
        let k2 = lindblad_rhs_matrix(&stage2, &h2, relax)?;
        let stage3 = &rho + &k2 * Complex::new(0.5 * step, 0.0);
        let k3 = lindblad_rhs_matrix(&stage3, &h2, relax)?;
        let stage4 = &rho + &k3 * Complex::new(step, 0.0);
        let k4 = lindblad_rhs_matrix(&stage4, &h4, relax)?;

        let incr = (k1 + k2 * Complex::new(2.0, 0.0) + k3 * Complex::new(2.0, 0.0) + k4)
            * Complex::new(step / 6.0, 0.0);
        rho += incr;
        t += step;

        let max_abs = rho.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max_abs > DIVERGENCE_LIMIT {
            return Err(QuantumError::Diverged { t, max_abs });
        }

        // Measure drift, then project back onto the physical manifold.
        let mut asym = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                asym = asym.max((rho[(i, j)] - rho[(j, i)].conj()).norm());
            }
        }
        trajectory.hermiticity_drift = trajectory.hermiticity_drift.max(asym);
        for i in 0..d {
            for j in i..d {
                let sym = 0.5 * (rho[(i, j)] + rho[(j, i)].conj());
                rho[(i, j)] = sym;
                rho[(j, i)] = sym.conj();
            }
        }
        let trace = rho.trace().re;
        trajectory.trace_drift = trajectory.trace_drift.max((trace - 1.0).abs());
        rho /= Complex::new(trace, 0.0);

        trajectory.steps = step_idx;
        if step_idx % record_every == 0 || step_idx == n_steps {
            trajectory.times.push(t);
            trajectory.states.push(DensityMatrix::try_new(rho.clone())?);
        }
    }
    Ok(trajectory)
}

/// Convenience: evolve and return only the final state.
pub fn evolve_rk4_final<F>(
    s: &AtomScenario,
    drive: F,
    rho_init: &DensityMatrix,
    dt: f64,
    t_end: f64,
    relax: &RelaxationModel,
) -> Result<DensityMatrix, QuantumError>
where
    F: FnMut(f64) -> RabiVector,
{
    let traj = evolve_rk4_sampled(s, drive, rho_init, dt, t_end, usize::MAX, relax)?;
    Ok(traj.final_state().clone())
}
