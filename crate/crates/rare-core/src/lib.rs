//! Physics and signal-processing core for a multi-band Rydberg atomic
//! receiver.
//!
//! A vapor cell of alkali atoms is dressed by a probe and a coupling laser
//! (electromagnetically induced transparency) and simultaneously driven by
//! `N` RF tones, each coupling the first Rydberg level to a further Rydberg
//! level. The transmitted probe power then encodes every RF band at once:
//! each band is read out at its intermediate frequency, the offset between
//! a strong reference tone and the data signal.
//!
//! The crate is organised bottom-up:
//!
//! - [`constants`] — fixed CODATA physical constants;
//! - [`scenario`] — scenario file parsing, validation, derived constants;
//! - [`quantum`] — the `(N+3)`-level Lindblad problem: Hamiltonian builder,
//!   relaxation models, closed-form / numerical steady states, RK4 time
//!   evolution;
//! - [`transfer`] — quantum state to measured probe power: the nonlinear
//!   transfer function, its linearization, gain decomposition, waveform
//!   synthesis, and the photon-shot / black-body noise model;
//! - [`optimizer`] — reference-drive resource allocation: optimal Rabi
//!   sum-square, spectral-efficiency-optimal and sensing-optimal attention
//!   vectors;
//! - [`pipeline`] — end-to-end Monte Carlo trials: payload generation, I/Q
//!   demodulation, ML detection/estimation, and error statistics.
//!
//! Every function here is a pure function of its inputs; randomness is
//! always injected through explicit seeds, so any result can be reproduced
//! bit for bit.

pub mod constants;
pub mod optimizer;
pub mod pipeline;
pub mod quantum;
pub mod scenario;
pub mod transfer;

pub use scenario::{derive_constants, load_scenario, AtomScenario, Band, BandPlan, BandService, DerivedConstants, ScenarioError};
