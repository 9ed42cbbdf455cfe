//! Closed-form predictions for the engine trajectory, the measurement
//! protocol and the squeezed engine.

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_BOLTZMANN};
use crate::error::{Error, Result};
use crate::fock::SqueezeSpec;
use crate::params::{derive_params, DerivedParams, TrapConfig};

/// A validated trap together with its derived parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticContext {
    pub cfg: TrapConfig,
    pub derived: DerivedParams,
}

impl AnalyticContext {
    pub fn new(cfg: TrapConfig) -> Result<Self> {
        Ok(AnalyticContext {
            derived: derive_params(&cfg)?,
            cfg,
        })
    }

    /// Equilibrium shift per unit R: hbar omega_x0 gamma / (m omega_z^2), m.
    pub fn drive_length(&self) -> f64 {
        HBAR * self.cfg.omega_x0 * self.derived.gamma / self.cfg.axial_stiffness()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GrowthMode {
    /// Uses the full coth law for R.
    #[default]
    Exact,
    /// Leading order in hbar omega_x0 / kB T.
    HighT,
}

/// omega_x(z) = omega_x0 / (1 + gamma z)^2.
pub fn radial_frequency(z: f64, ctx: &AnalyticContext) -> Result<f64> {
    let u = 1.0 + ctx.derived.gamma * z;
    if !(u > 0.0) {
        return Err(Error::OutOfTaper(u));
    }
    Ok(ctx.cfg.omega_x0 / (u * u))
}

/// R = coth(hbar omega_x0 / 2 kB T) of a thermal state; 1 at T = 0.
pub fn thermal_r(temperature: f64, ctx: &AnalyticContext) -> f64 {
    if temperature <= 0.0 {
        return 1.0;
    }
    let x = HBAR * ctx.cfg.omega_x0 / (2.0 * K_BOLTZMANN * temperature);
    1.0 / x.tanh()
}

/// Position at the n-th bath contact for an ion released at rest from z0.
pub fn stroboscopic_position(n: usize, z0: f64, t1: f64, t2: f64, ctx: &AnalyticContext) -> f64 {
    let k = ctx.drive_length();
    let r1 = thermal_r(t1, ctx);
    let r2 = thermal_r(t2, ctx);
    let step = k * (r2 - r1);
    let nf = n as f64;
    if n.is_multiple_of(2) {
        z0 + nf * step
    } else {
        -z0 + 2.0 * k * r1 - (nf - 1.0) * step
    }
}

/// Growth of the even-branch peaks per engine cycle, m.
pub fn delta_z(t1: f64, t2: f64, ctx: &AnalyticContext, mode: GrowthMode) -> f64 {
    match mode {
        GrowthMode::Exact => 2.0 * ctx.drive_length() * (thermal_r(t2, ctx) - thermal_r(t1, ctx)),
        GrowthMode::HighT => {
            4.0 * K_BOLTZMANN * ctx.derived.gamma / ctx.cfg.axial_stiffness() * (t2 - t1)
        }
    }
}

/// Separation of the two measured mean positions after N cycles, 2 N dz.
pub fn protocol_amplitude(n_cycles: usize, t1: f64, t2: f64, ctx: &AnalyticContext) -> f64 {
    2.0 * n_cycles as f64 * delta_z(t1, t2, ctx, GrowthMode::Exact)
}

/// A = cosh 2r + sinh 2r cos(alpha) / (4 kappa^2 - 1).
pub fn amplification(r: f64, alpha: f64, kappa: f64) -> f64 {
    (2.0 * r).cosh() + (2.0 * r).sinh() * alpha.cos() / (4.0 * kappa * kappa - 1.0)
}

/// Per-cycle growth when both bath contacts are followed by the same squeeze.
pub fn delta_z_squeezed(
    t1: f64,
    t2: f64,
    spec: &SqueezeSpec,
    ctx: &AnalyticContext,
    mode: GrowthMode,
) -> f64 {
    amplification(spec.r, spec.alpha, ctx.derived.kappa) * delta_z(t1, t2, ctx, mode)
}

/// Squeeze amplitude above which the squeezed thermal state has a negative
/// P function: r* = ln(2 (2 n_th + 1)) / 2.
pub fn squeeze_quantum_threshold(n_th: f64) -> f64 {
    0.5 * (2.0 * (2.0 * n_th + 1.0)).ln()
}
