//! Classical axial motion of the ion: tapered-trap force and velocity Verlet.

use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::params::TrapConfig;

/// Axial position, velocity and time of the flywheel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlywheelState {
    pub z: f64,
    pub v: f64,
    pub t: f64,
}

impl FlywheelState {
    pub fn new(z: f64, v: f64, t: f64) -> Result<Self> {
        if !(z.is_finite() && v.is_finite() && t.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "flywheel state must be finite, got z={z}, v={v}, t={t}"
            )));
        }
        Ok(FlywheelState { z, v, t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ForceModel {
    /// -m omega_z^2 z + gamma hbar omega_x0 R
    #[default]
    Approximate,
    /// Keeps the (1 + gamma z)^-5 factor of the taper force.
    Exact,
}

/// Axial force on the ion for radial expectation value `r_value`, N.
pub fn axial_force(z: f64, r_value: f64, cfg: &TrapConfig, model: ForceModel) -> Result<f64> {
    let gamma = cfg.taper_angle_theta.tan() / cfg.r0;
    let u = 1.0 + gamma * z;
    if !(u > 0.0) {
        return Err(Error::OutOfTaper(u));
    }
    let push = gamma * HBAR * cfg.omega_x0 * r_value;
    let push = match model {
        ForceModel::Approximate => push,
        ForceModel::Exact => push / u.powi(5),
    };
    Ok(-cfg.axial_stiffness() * z + push)
}

/// One velocity-Verlet step: half kick, drift, half kick. Negative `dt`
/// runs the step backwards.
pub fn verlet_step<F>(s: &FlywheelState, mass: f64, dt: f64, mut force: F) -> Result<FlywheelState>
where
    F: FnMut(f64) -> Result<f64>,
{
    let half = 0.5 * dt / mass;
    let v_half = s.v + half * force(s.z)?;
    let z = s.z + dt * v_half;
    let v = v_half + half * force(z)?;
    Ok(FlywheelState { z, v, t: s.t + dt })
}

/// Kinetic plus harmonic potential energy of the axial motion, J.
pub fn axial_energy(s: &FlywheelState, cfg: &TrapConfig) -> f64 {
    0.5 * cfg.mass * s.v * s.v + 0.5 * cfg.axial_stiffness() * s.z * s.z
}
