//! Time evolution of the radial state under the z-dependent Hamiltonian
//!
//! H(z) = hbar omega_x0 (N + 1/2) + g(z) (X + 2N + 1)
//!
//! Three routes are provided: the Newton-polynomial propagator used by the
//! engine, an eigendecomposition oracle for small bases, and the closed
//! equations of motion of the Gaussian moments.

mod dense;
mod moments;
mod newton;

pub use dense::{dense_propagate_oracle, DENSE_ORACLE_MAX_DIM};
pub use moments::{moments_propagate, moments_step};
pub use newton::{newton_propagate, propagate_with_hamiltonian, NewtonConfig};

use nalgebra::DMatrix;

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::params::{derive_params, TrapConfig};

/// Coupling energy g(z) = (hbar omega_x0 / 4) ((1 + gamma z)^-4 - 1), J.
pub fn coupling_g(z: f64, cfg: &TrapConfig) -> Result<f64> {
    let gamma = cfg.taper_angle_theta.tan() / cfg.r0;
    let u = gamma * z;
    if !(1.0 + u > 0.0) {
        return Err(Error::OutOfTaper(1.0 + u));
    }
    // exp_m1/ln_1p keep full precision for |gamma z| << 1.
    Ok(0.25 * HBAR * cfg.omega_x0 * (-4.0 * u.ln_1p()).exp_m1())
}

/// One piecewise-constant propagation interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationStep {
    dt: f64,
    /// Axial position held fixed during the step, m.
    pub z: f64,
}

impl PropagationStep {
    pub fn new(dt: f64, z: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidStep(format!("dt must be positive, got {dt}")));
        }
        if !z.is_finite() {
            return Err(Error::InvalidStep(format!("z must be finite, got {z}")));
        }
        Ok(PropagationStep { dt, z })
    }

    /// The same step run backwards in time.
    pub fn reversed(self) -> Self {
        PropagationStep {
            dt: -self.dt,
            z: self.z,
        }
    }

    /// Signed step length; negative for a reversed step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub(crate) fn validate_for(&self, cfg: &TrapConfig) -> Result<()> {
        let tau_z = derive_params(cfg)?.tau_z;
        if self.dt.abs() > tau_z / 100.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidStep(format!(
                "|dt| = {:e} s exceeds tau_z / 100 = {:e} s",
                self.dt.abs(),
                tau_z / 100.0
            )));
        }
        Ok(())
    }
}

/// H(z) / hbar in the number basis, stored by its two nonzero diagonals.
///
/// The Hamiltonian only couples levels n and n + 2, so it is real symmetric
/// and block tridiagonal in the even and odd parity sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialHamiltonian {
    /// H_nn / hbar, rad/s.
    pub diag: Vec<f64>,
    /// H_{n, n+2} / hbar, rad/s; length dim - 2.
    pub off2: Vec<f64>,
}

impl RadialHamiltonian {
    pub fn new(dim: usize, z: f64, cfg: &TrapConfig) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let g = coupling_g(z, cfg)? / HBAR;
        Ok(Self::from_coupling(dim, cfg.omega_x0, g))
    }

    /// Builds the matrix for a coupling `g_rate = g / hbar` in rad/s.
    pub fn from_coupling(dim: usize, omega_x0: f64, g_rate: f64) -> Self {
        let diag = (0..dim)
            .map(|n| {
                let nf = n as f64;
                omega_x0 * (nf + 0.5) + g_rate * (2.0 * nf + 1.0)
            })
            .collect();
        let off2 = (0..dim.saturating_sub(2))
            .map(|n| g_rate * (((n + 1) * (n + 2)) as f64).sqrt())
            .collect();
        RadialHamiltonian { diag, off2 }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin enclosure [lo, hi] of the spectrum, rad/s.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let d = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..d {
            let mut radius = 0.0;
            if n + 2 < d {
                radius += self.off2[n].abs();
            }
            if n >= 2 {
                radius += self.off2[n - 2].abs();
            }
            lo = lo.min(self.diag[n] - radius);
            hi = hi.max(self.diag[n] + radius);
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        for n in 0..d {
            h[(n, n)] = self.diag[n];
        }
        for (n, &v) in self.off2.iter().enumerate() {
            h[(n, n + 2)] = v;
            h[(n + 2, n)] = v;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ladder_matrices;
    use approx::assert_relative_eq;

    #[test]
    fn coupling_examples() {
        let cfg = TrapConfig::reference();
        assert_eq!(coupling_g(0.0, &cfg).unwrap(), 0.0);

        let gamma = derive_params(&cfg).unwrap().gamma;
        let quantum = HBAR * cfg.omega_x0;
        let z = 1e-9;
        assert_relative_eq!(
            coupling_g(z, &cfg).unwrap(),
            -quantum * gamma * z,
            max_relative = 1e-5
        );

        // gamma z = -6.351e-4: (1 + gamma z)^-4 - 1 = 2.5427e-3, times hbar omega / 4.
        let g = coupling_g(-1.1e-6, &cfg).unwrap();
        let expected = 0.25 * quantum * ((1.0 - 1.1e-6 * gamma).powi(-4) - 1.0);
        assert_relative_eq!(g, expected, max_relative = 1e-10);
        assert!((g - 4.21e-31).abs() < 0.01e-31, "g = {g:e}");

        assert!(matches!(
            coupling_g(-2.0 / gamma, &cfg),
            Err(Error::OutOfTaper(_))
        ));
    }

    #[test]
    fn hamiltonian_matches_operator_algebra() {
        let dim = 10;
        let omega = 3.0;
        let g = 0.2;
        let h = RadialHamiltonian::from_coupling(dim, omega, g).to_dense();
        let ops = ladder_matrices(dim).unwrap();
        let a = ops.annihilation.map(|c| c.re);
        let ad = ops.creation.map(|c| c.re);
        let n = ops.number.map(|c| c.re);
        let id = DMatrix::<f64>::identity(dim, dim);
        let x = &a * &a + &ad * &ad;
        let expected = (&n + &id * 0.5) * omega + (x + &n * 2.0 + &id) * g;
        assert!((h - expected).abs().max() < 1e-12);
    }

    #[test]
    fn gershgorin_encloses_spectrum() {
        let h = RadialHamiltonian::from_coupling(24, 1.0, 0.05);
        let (lo, hi) = h.spectral_bounds();
        let ev = h.to_dense().symmetric_eigenvalues();
        assert!(ev.iter().all(|&l| l >= lo - 1e-12 && l <= hi + 1e-12));
    }

    #[test]
    fn step_validation() {
        let cfg = TrapConfig::reference();
        let tau = derive_params(&cfg).unwrap().tau_z;
        assert!(PropagationStep::new(0.0, 0.0).is_err());
        assert!(PropagationStep::new(tau / 50.0, 0.0)
            .unwrap()
            .validate_for(&cfg)
            .is_err());
        let s = PropagationStep::new(tau / 100.0, 0.0).unwrap();
        s.validate_for(&cfg).unwrap();
        assert_eq!(s.reversed().dt(), -tau / 100.0);
    }
}
