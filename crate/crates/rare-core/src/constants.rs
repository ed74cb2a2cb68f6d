//! Fixed physical constants (CODATA 2018 values).
//!
//! These are never user-configurable: scenario files express laboratory
//! quantities (Rabi frequencies, densities, dipole moments) and everything
//! else is derived through the constants below.

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054571817e-34;

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.8541878128e-12;

/// Boltzmann constant (J/K).
pub const KB: f64 = 1.380649e-23;

/// Speed of light in vacuum (m/s).
pub const C_LIGHT: f64 = 299792458.0;

/// Elementary charge (C).
pub const Q_E: f64 = 1.602176634e-19;

/// Bohr radius (m).
pub const A0: f64 = 5.29177210903e-11;

/// Atomic dipole unit q·a₀ (C·m); transition dipole moments are quoted as
/// multiples of this.
pub const QA0: f64 = Q_E * A0;

/// 2π, used throughout to convert between ordinary and angular frequency.
pub const TWO_PI: f64 = std::f64::consts::TAU;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_positive() {
        for (name, v) in [
            ("hbar", HBAR),
            ("eps0", EPS0),
            ("kB", KB),
            ("c", C_LIGHT),
            ("q", Q_E),
            ("a0", A0),
            ("qa0", QA0),
        ] {
            assert!(v > 0.0, "constant {name} must be positive, got {v}");
        }
    }

    #[test]
    fn dipole_unit_is_charge_times_bohr_radius() {
        assert_eq!(QA0, Q_E * A0);
    }

    #[test]
    fn two_pi_matches_std() {
        assert_eq!(TWO_PI, 2.0 * std::f64::consts::PI);
    }
}
