//! Closed equations of motion for (X, Y, N) under H(z):
//!
//! dX/dt = 2 (omega + 2G) Y
//! dY/dt = -2 (omega + 2G) X - 8 G N - 4 G
//! dN/dt = -2 G Y
//!
//! with G = g(z) / hbar. Each step with z frozen is solved exactly through
//! the exponential of the affine 4x4 generator.

use nalgebra::{Matrix4, Vector4};

use super::coupling_g;
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::fock::GaussianMoments;
use crate::params::TrapConfig;

fn generator(omega: f64, g_rate: f64) -> Matrix4<f64> {
    let w = 2.0 * (omega + 2.0 * g_rate);
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, w, 0.0, 0.0,
        -w, 0.0, -8.0 * g_rate, -4.0 * g_rate,
        0.0, -2.0 * g_rate, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    );
    m
}

/// Advances the moments by the signed time `dt` with the coupling held at g(z).
pub fn moments_step(
    m: &GaussianMoments,
    z: f64,
    dt: f64,
    cfg: &TrapConfig,
) -> Result<GaussianMoments> {
    if !dt.is_finite() {
        return Err(Error::InvalidStep(format!("dt must be finite, got {dt}")));
    }
    let g_rate = coupling_g(z, cfg)? / HBAR;
    let propagator = (generator(cfg.omega_x0, g_rate) * dt).exp();
    let v = propagator * Vector4::new(m.x, m.y, m.n, 1.0);
    Ok(GaussianMoments {
        x: v[0],
        y: v[1],
        n: v[2],
    })
}

/// Runs `moments_step` once per sample of the frozen axial trajectory.
pub fn moments_propagate(
    m: &GaussianMoments,
    z_of_t: &[f64],
    dt: f64,
    cfg: &TrapConfig,
) -> Result<GaussianMoments> {
    z_of_t
        .iter()
        .try_fold(*m, |acc, &z| moments_step(&acc, z, dt, cfg))
}
