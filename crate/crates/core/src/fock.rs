//! Truncated Fock-space description of the x-radial working medium.
//!
//! All states live in the number basis of the bare `omega_x0` oscillator.
//! The taper only enters the dynamics through the coupling term of the
//! Hamiltonian, see [`crate::propagator`].

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_BOLTZMANN};
use crate::error::{Error, Result};
use crate::params::TrapConfig;
use crate::propagator::coupling_g;

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-10;
/// Largest allowed population in the top 10% of the Fock levels.
pub const TRUNCATION_GUARD: f64 = 1e-6;
/// Largest allowed geometric tail discarded by [`thermal_state`].
pub const THERMAL_TAIL_LIMIT: f64 = 1e-8;
pub const DEFAULT_DIM: usize = 128;

/// Annihilation, creation and number operators on a truncated basis.
#[derive(Debug, Clone)]
pub struct LadderOps {
    pub annihilation: CMatrix,
    pub creation: CMatrix,
    pub number: CMatrix,
}

pub fn ladder_matrices(dim: usize) -> Result<LadderOps> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let annihilation = CMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let creation = annihilation.adjoint();
    let number = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            ZERO
        }
    });
    Ok(LadderOps {
        annihilation,
        creation,
        number,
    })
}

/// Bose-Einstein occupation (exp(hbar omega / kB T) - 1)^-1; zero at T = 0.
pub fn thermal_occupation(temperature: f64, omega: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_BOLTZMANN * temperature);
    1.0 / x.exp_m1()
}

/// Squeeze parameter xi = r exp(i alpha).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeSpec {
    pub r: f64,
    pub alpha: f64,
}

impl SqueezeSpec {
    pub fn new(r: f64, alpha: f64) -> Result<Self> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "squeeze amplitude must be finite and >= 0, got {r}"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "squeeze phase must be finite, got {alpha}"
            )));
        }
        Ok(SqueezeSpec {
            r,
            alpha: alpha.rem_euclid(TAU),
        })
    }

    pub fn xi(&self) -> Complex64 {
        Complex64::from_polar(self.r, self.alpha)
    }
}

/// Second moments (X, Y, N) = (<a+^2 + a^2>, i<a+^2 - a^2>, <a+ a>).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub x: f64,
    pub y: f64,
    pub n: f64,
}

impl GaussianMoments {
    pub fn thermal(n_th: f64) -> Self {
        GaussianMoments {
            x: 0.0,
            y: 0.0,
            n: n_th,
        }
    }

    /// Moments of S(xi) rho_th S(xi)^dagger.
    pub fn squeezed_thermal(n_th: f64, spec: &SqueezeSpec) -> Self {
        let w = 2.0 * n_th + 1.0;
        let s2 = (2.0 * spec.r).sinh();
        GaussianMoments {
            x: -w * s2 * spec.alpha.cos(),
            y: -w * s2 * spec.alpha.sin(),
            n: 0.5 * (w * (2.0 * spec.r).cosh() - 1.0),
        }
    }

    /// R = <(a + a+)^2> = X + 2N + 1.
    pub fn r_value(&self) -> f64 {
        self.x + 2.0 * self.n + 1.0
    }

    /// (2N + 1)^2 - X^2 - Y^2, conserved by quadratic Hamiltonians.
    pub fn uncertainty_invariant(&self) -> f64 {
        let w = 2.0 * self.n + 1.0;
        w * w - self.x * self.x - self.y * self.y
    }
}

/// Density operator of the radial mode in a truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialState {
    rho: CMatrix,
}

impl RadialState {
    /// Wraps a matrix after checking shape, Hermiticity and trace.
    pub fn from_matrix(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::InvalidConfig(format!(
                "density matrix must be square, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if rho.nrows() < 2 {
            return Err(Error::InvalidDimension(rho.nrows()));
        }
        let state = RadialState { rho };
        let herm = state.hermiticity_error();
        if herm >= HERMITICITY_TOL {
            return Err(Error::InvalidConfig(format!(
                "density matrix is not Hermitian (deviation {herm:e})"
            )));
        }
        let trace = state.trace();
        if (trace - 1.0).abs() >= TRACE_TOL {
            return Err(Error::InvalidConfig(format!(
                "density matrix trace is {trace}, expected 1"
            )));
        }
        Ok(state)
    }

    pub(crate) fn from_matrix_unchecked(rho: CMatrix) -> Self {
        RadialState { rho }
    }

    /// Projector onto the Fock state |n>.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if n >= dim {
            return Err(Error::InvalidConfig(format!(
                "Fock level {n} outside a {dim}-level basis"
            )));
        }
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(n, n)] = Complex64::new(1.0, 0.0);
        Ok(RadialState { rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).sum()
    }

    /// max |rho - rho^dagger|.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..d {
            for i in 0..=j {
                let diff = self.rho[(i, j)] - self.rho[(j, i)].conj();
                worst = worst.max(diff.norm());
            }
        }
        worst
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
        self.rho.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let herm = (&self.rho + self.rho.adjoint()).scale(0.5);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().first().copied().unwrap_or(0.0)
    }

    /// Population held by the top 10% of levels.
    pub fn truncation_weight(&self) -> f64 {
        let d = self.dim();
        let start = d - (d / 10).max(1);
        (start..d).map(|i| self.rho[(i, i)].re.max(0.0)).sum()
    }

    pub fn is_under_resolved(&self) -> bool {
        self.truncation_weight() >= TRUNCATION_GUARD
    }

    pub fn check_truncation(&self) -> Result<()> {
        let w = self.truncation_weight();
        if w >= TRUNCATION_GUARD {
            return Err(Error::TruncationTooSmall(format!(
                "{w:e} of the population sits in the top 10% of {} levels",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Checks Hermiticity, unit trace and positivity at the library tolerances.
    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm >= HERMITICITY_TOL {
            return Err(Error::InvalidConfig(format!(
                "Hermiticity violated by {herm:e}"
            )));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() >= TRACE_TOL {
            return Err(Error::InvalidConfig(format!("trace drifted to {trace}")));
        }
        let min = self.min_eigenvalue();
        if min <= -PSD_TOL {
            return Err(Error::InvalidConfig(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// True when every element with odd n - m vanishes, i.e. the state only
    /// couples Fock levels of equal parity.
    pub fn is_parity_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| {
            ((j + 1) % 2..d)
                .step_by(2)
                .all(|i| self.rho[(i, j)] == ZERO)
        })
    }

    /// Trace distance 1/2 ||rho - sigma||_1.
    pub fn trace_distance(&self, other: &RadialState) -> f64 {
        let diff = &self.rho - &other.rho;
        let herm = (&diff + diff.adjoint()).scale(0.5);
        0.5 * herm
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    }

    /// Nonzero matrix elements as `[row, col, re, im]` rows.
    pub fn export_entries(&self, threshold: f64) -> Vec<[f64; 4]> {
        let d = self.dim();
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let c = self.rho[(i, j)];
                if c.norm() > threshold {
                    out.push([i as f64, j as f64, c.re, c.im]);
                }
            }
        }
        out
    }

    /// JSON array of `[row, col, re, im]` entries.
    pub fn to_json(&self, threshold: f64) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .export_entries(threshold)
            .into_iter()
            .map(|[i, j, re, im]| serde_json::json!([i as usize, j as usize, re, im]))
            .collect();
        serde_json::Value::Array(entries)
    }
}

/// Smallest basis size for which a thermal or squeezed-thermal state keeps
/// its discarded tail below [`THERMAL_TAIL_LIMIT`], rounded up to a multiple
/// of 16.
pub fn auto_dim(n_th: f64, r: f64) -> usize {
    let heuristic = (8.0 * (n_th + 1.0) * (2.0 * r).exp()).ceil() as usize;
    // Photon-number tails of a Gaussian state decay like lambda^n where
    // lambda = (nu - 1) / (nu + 1) and nu is its largest quadrature variance.
    let nu = (2.0 * n_th + 1.0) * (2.0 * r).exp();
    let tail = if nu > 1.0 + 1e-12 {
        let lambda = (nu - 1.0) / (nu + 1.0);
        let mut n = THERMAL_TAIL_LIMIT.ln() / lambda.ln();
        if r > 0.0 {
            n = 1.25 * n + 16.0;
        }
        n.ceil() as usize + 1
    } else {
        0
    };
    let dim = heuristic.max(tail).max(32);
    dim.div_ceil(16) * 16
}

/// Geometric Gibbs state with mean occupation `n_th`, truncated to `dim` levels.
pub fn thermal_state(n_th: f64, dim: usize) -> Result<RadialState> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(n_th.is_finite() && n_th >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "thermal occupation must be finite and >= 0, got {n_th}"
        )));
    }
    let mut rho = CMatrix::zeros(dim, dim);
    if n_th == 0.0 {
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        return Ok(RadialState { rho });
    }
    let ratio = n_th / (1.0 + n_th);
    let tail = ratio.powi(dim as i32);
    if tail >= THERMAL_TAIL_LIMIT {
        return Err(Error::TruncationTooSmall(format!(
            "thermal tail beyond {dim} levels is {tail:e} for n_th = {n_th}; need at least {} levels",
            auto_dim(n_th, 0.0)
        )));
    }
    let mut p = 1.0;
    let mut weights = Vec::with_capacity(dim);
    for _ in 0..dim {
        weights.push(p);
        p *= ratio;
    }
    let total: f64 = weights.iter().sum();
    for (i, w) in weights.into_iter().enumerate() {
        rho[(i, i)] = Complex64::new(w / total, 0.0);
    }
    Ok(RadialState { rho })
}

/// The unitary S(xi) = exp((xi* a^2 - xi a+^2) / 2) on a truncated basis.
#[derive(Debug, Clone)]
pub struct SqueezeOperator {
    spec: SqueezeSpec,
    matrix: CMatrix,
}

impl SqueezeOperator {
    pub fn new(dim: usize, spec: SqueezeSpec) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if spec.r == 0.0 {
            return Ok(SqueezeOperator {
                spec,
                matrix: CMatrix::identity(dim, dim),
            });
        }
        let xi = spec.xi();
        // K = i G with G the antihermitian generator, so K is Hermitian and
        // S = exp(G) = V exp(-i Lambda) V^dagger.
        let mut k = CMatrix::zeros(dim, dim);
        for n in 0..dim.saturating_sub(2) {
            let amp = (((n + 1) * (n + 2)) as f64).sqrt();
            // (a^2)_{n, n+2} and (a+^2)_{n+2, n}.
            let g_upper = 0.5 * xi.conj() * amp;
            let g_lower = -0.5 * xi * amp;
            k[(n, n + 2)] = Complex64::i() * g_upper;
            k[(n + 2, n)] = Complex64::i() * g_lower;
        }
        let eig = k.symmetric_eigen();
        let v = &eig.eigenvectors;
        let phases =
            CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l)));
        let mut matrix = v * phases * v.adjoint();
        // The generator preserves parity; drop rounding noise between sectors.
        for j in 0..dim {
            for i in ((j + 1) % 2..dim).step_by(2) {
                matrix[(i, j)] = ZERO;
            }
        }
        Ok(SqueezeOperator { spec, matrix })
    }

    pub fn spec(&self) -> SqueezeSpec {
        self.spec
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// S rho S^dagger, failing when the result leaks into the top of the basis.
    pub fn apply(&self, state: &RadialState) -> Result<RadialState> {
        if state.dim() != self.matrix.nrows() {
            return Err(Error::InvalidConfig(format!(
                "squeeze operator has dimension {}, state has {}",
                self.matrix.nrows(),
                state.dim()
            )));
        }
        if self.spec.r == 0.0 {
            return Ok(state.clone());
        }
        let mut rho = &self.matrix * state.matrix() * self.matrix.adjoint();
        // Remove the rounding-level anti-Hermitian part.
        let herm = (&rho + rho.adjoint()).scale(0.5);
        rho = herm;
        let out = RadialState { rho };
        out.check_truncation()?;
        Ok(out)
    }
}

pub fn squeeze(state: &RadialState, spec: &SqueezeSpec) -> Result<RadialState> {
    SqueezeOperator::new(state.dim(), *spec)?.apply(state)
}

/// Expectation values of X, Y and N, computed from the relevant diagonals.
pub fn moments(state: &RadialState) -> GaussianMoments {
    let rho = state.matrix();
    let d = state.dim();
    let n: f64 = (0..d).map(|i| i as f64 * rho[(i, i)].re).sum();
    // <a^2> = sum_n rho_{n+2, n} sqrt((n+1)(n+2)).
    let mut a2 = ZERO;
    for k in 0..d.saturating_sub(2) {
        a2 += rho[(k + 2, k)] * (((k + 1) * (k + 2)) as f64).sqrt();
    }
    GaussianMoments {
        x: 2.0 * a2.re,
        y: 2.0 * a2.im,
        n,
    }
}

/// Tr(rho H_radial(z)) = hbar omega_x0 (N + 1/2) + g(z) R.
pub fn radial_energy(state: &RadialState, z: f64, cfg: &TrapConfig) -> Result<f64> {
    let m = moments(state);
    moments_energy(&m, z, cfg)
}

pub(crate) fn moments_energy(m: &GaussianMoments, z: f64, cfg: &TrapConfig) -> Result<f64> {
    let g = coupling_g(z, cfg)?;
    Ok(HBAR * cfg.omega_x0 * (m.n + 0.5) + g * m.r_value())
}
