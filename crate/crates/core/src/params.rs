//! Trap configuration and the derived engine parameters.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::constants::{ATOMIC_MASS_UNIT, HBAR};
use crate::error::{Error, Result};

/// Geometry and frequencies of the tapered Paul trap, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Ion mass, kg.
    pub mass: f64,
    /// Radial angular frequency at z = 0, rad/s.
    pub omega_x0: f64,
    /// Axial angular frequency, rad/s.
    pub omega_z: f64,
    /// Tilt of the blade electrodes, rad.
    pub taper_angle_theta: f64,
    /// Ion-to-electrode distance, m.
    pub r0: f64,
}

/// Quantities that every module derives from the trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// tan(theta) / r0, 1/m.
    pub gamma: f64,
    /// omega_x0 / omega_z.
    pub kappa: f64,
    /// Half axial period pi / omega_z, s.
    pub tau_z: f64,
}

impl TrapConfig {
    /// Builds a trap from laboratory units: mass in amu, frequencies in Hz,
    /// taper angle in degrees.
    pub fn from_lab_units(
        mass_amu: f64,
        nu_x0_hz: f64,
        nu_z_hz: f64,
        theta_deg: f64,
        r0_m: f64,
    ) -> Result<Self> {
        let cfg = TrapConfig {
            mass: mass_amu * ATOMIC_MASS_UNIT,
            omega_x0: 2.0 * PI * nu_x0_hz,
            omega_z: 2.0 * PI * nu_z_hz,
            taper_angle_theta: theta_deg.to_radians(),
            r0: r0_m,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 40Ca+ in a trap with theta = pi/6, r0 = 1 mm, 1 MHz radial and
    /// 0.1 MHz axial frequency.
    pub fn reference() -> Self {
        TrapConfig {
            mass: 40.0 * ATOMIC_MASS_UNIT,
            omega_x0: 2.0 * PI * 1.0e6,
            omega_z: 2.0 * PI * 1.0e5,
            taper_angle_theta: PI / 6.0,
            r0: 1.0e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("omega_x0", self.omega_x0),
            ("omega_z", self.omega_z),
            ("taper_angle_theta", self.taper_angle_theta),
            ("r0", self.r0),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        if self.taper_angle_theta >= FRAC_PI_2 {
            return Err(Error::InvalidConfig(format!(
                "taper_angle_theta must lie in (0, pi/2), got {}",
                self.taper_angle_theta
            )));
        }
        if self.omega_x0 <= self.omega_z {
            return Err(Error::InvalidConfig(format!(
                "omega_x0 ({}) must exceed omega_z ({})",
                self.omega_x0, self.omega_z
            )));
        }
        Ok(())
    }

    /// Radial phonon energy hbar * omega_x0, J.
    pub fn radial_quantum(&self) -> f64 {
        HBAR * self.omega_x0
    }

    /// Axial spring constant m * omega_z^2, kg/s^2.
    pub fn axial_stiffness(&self) -> f64 {
        self.mass * self.omega_z * self.omega_z
    }
}

pub fn derive_params(cfg: &TrapConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    Ok(DerivedParams {
        gamma: cfg.taper_angle_theta.tan() / cfg.r0,
        kappa: cfg.omega_x0 / cfg.omega_z,
        tau_z: PI / cfg.omega_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_geometry() {
        let d = derive_params(&TrapConfig::reference()).unwrap();
        // tan(pi/6) / 1e-3 = 577.350269...
        assert_relative_eq!(d.gamma, 577.350_269_189_625_8, max_relative = 1e-12);
        assert_eq!(d.kappa, 10.0);
        assert_relative_eq!(d.tau_z, 5.0e-6, max_relative = 1e-14);
    }

    #[test]
    fn gamma_scales_inversely_with_r0() {
        let mut cfg = TrapConfig::reference();
        let g1 = derive_params(&cfg).unwrap().gamma;
        cfg.r0 *= 2.0;
        let g2 = derive_params(&cfg).unwrap().gamma;
        assert_relative_eq!(g2, g1 / 2.0, max_relative = 1e-15);
        cfg.taper_angle_theta = 1e-9;
        assert!(derive_params(&cfg).unwrap().gamma < 1e-5);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = TrapConfig::reference();
        cfg.taper_angle_theta = 0.0;
        assert!(derive_params(&cfg).is_err());
        cfg.taper_angle_theta = FRAC_PI_2;
        assert!(derive_params(&cfg).is_err());
        let mut cfg = TrapConfig::reference();
        cfg.omega_z = cfg.omega_x0 * 2.0;
        assert!(matches!(derive_params(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = TrapConfig::reference();
        cfg.mass = -1.0;
        assert!(derive_params(&cfg).is_err());
    }

    #[test]
    fn lab_units_match_si() {
        let cfg = TrapConfig::from_lab_units(40.0, 1.0e6, 1.0e5, 30.0, 1.0e-3).unwrap();
        let reference = TrapConfig::reference();
        assert_relative_eq!(
            cfg.taper_angle_theta,
            reference.taper_angle_theta,
            max_relative = 1e-15
        );
        assert_eq!(cfg.omega_x0, reference.omega_x0);
        assert_eq!(cfg.mass, reference.mass);
    }
}
