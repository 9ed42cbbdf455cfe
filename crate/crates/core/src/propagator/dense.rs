//! Exact single-step propagation through the eigendecomposition of H(z).
//! Cubic in the dimension, so only meant for small validation bases.

use num_complex::Complex64;

use super::{PropagationStep, RadialHamiltonian};
use crate::error::{Error, Result};
use crate::fock::{CMatrix, RadialState};
use crate::params::TrapConfig;

pub const DENSE_ORACLE_MAX_DIM: usize = 64;

/// rho -> U e^{-i Lambda dt} U^T rho U e^{+i Lambda dt} U^T.
pub fn dense_propagate_oracle(
    state: &RadialState,
    step: &PropagationStep,
    cfg: &TrapConfig,
) -> Result<RadialState> {
    let dim = state.dim();
    if dim > DENSE_ORACLE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim,
            limit: DENSE_ORACLE_MAX_DIM,
        });
    }
    step.validate_for(cfg)?;
    let h = RadialHamiltonian::new(dim, step.z, cfg)?;
    let eig = h.to_dense().symmetric_eigen();
    let u = eig.eigenvectors.map(|v| Complex64::new(v, 0.0));
    let lambda = eig.eigenvalues;
    let dt = step.dt();
    let mut rotated: CMatrix = u.transpose() * state.matrix() * &u;
    for j in 0..dim {
        for i in 0..dim {
            let phase = Complex64::from_polar(1.0, -(lambda[i] - lambda[j]) * dt);
            rotated[(i, j)] *= phase;
        }
    }
    let out = &u * rotated * u.transpose();
    Ok(RadialState::from_matrix_unchecked(out))
}
