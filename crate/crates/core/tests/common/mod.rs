#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use otto_probe::fock::RadialState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A A^dagger / Tr for a random complex A of the given rank.
pub fn random_state<R: Rng>(dim: usize, rank: usize, rng: &mut R) -> RadialState {
    let a = DMatrix::from_fn(dim, rank, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let mut rho = &a * a.adjoint();
    let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
    rho /= Complex64::new(tr, 0.0);
    let herm = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    RadialState::from_matrix(herm).unwrap()
}
