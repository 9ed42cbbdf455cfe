//! Newton-polynomial expansion of exp(-i L dt) for the Liouvillian
//! L rho = [H, rho] / hbar.
//!
//! The commutator spectrum {lambda_i - lambda_j} is real and lies in
//! [-D, D] where D is the spectral diameter of H. The expansion uses
//! Leja-ordered Chebyshev points on that interval, rescaled to [-2, 2]
//! (an interval of logarithmic capacity one) so that the divided
//! differences and the Newton basis polynomials stay O(1).
//!
//! H couples only levels of equal parity, so rho is split into its four
//! parity blocks and each block is advanced with two tridiagonal factors.
//! Blocks that are identically zero stay zero and are skipped.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PropagationStep, RadialHamiltonian};
use crate::error::{Error, Result};
use crate::fock::{CMatrix, RadialState};
use crate::params::TrapConfig;

const LEJA_POINTS: usize = 512;
const LEJA_CANDIDATES: usize = 8192;
/// Blocks with more elements than this are split across rayon tasks.
const PARALLEL_ELEMENTS: usize = 1 << 15;
/// Matrix elements smaller than this are set to zero after each step.
const FLUSH_BELOW: f64 = 1e-150;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_order: usize,
    /// Stop once |a_k| * ||R_k(L) rho|| falls below this for two terms.
    pub coeff_tolerance: f64,
    /// Safety factor applied to the estimated spectral diameter.
    pub spectral_margin: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_order: 160,
            coeff_tolerance: 1e-12,
            spectral_margin: 1.1,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order < 4 || self.max_order >= LEJA_POINTS {
            return Err(Error::InvalidConfig(format!(
                "Newton max_order must lie in [4, {}), got {}",
                LEJA_POINTS, self.max_order
            )));
        }
        if !(self.coeff_tolerance > 0.0 && self.coeff_tolerance <= 1e-6) {
            return Err(Error::InvalidConfig(format!(
                "Newton coeff_tolerance must lie in (0, 1e-6], got {}",
                self.coeff_tolerance
            )));
        }
        if !(self.spectral_margin >= 1.0 && self.spectral_margin.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "spectral_margin must be >= 1, got {}",
                self.spectral_margin
            )));
        }
        Ok(())
    }
}

/// Leja ordering of Chebyshev extrema on [-2, 2]; starts with 2, -2, 0.
fn leja_points() -> &'static [f64] {
    static POINTS: OnceLock<Vec<f64>> = OnceLock::new();
    POINTS.get_or_init(|| {
        let m = LEJA_CANDIDATES;
        let candidates: Vec<f64> = (0..=m)
            .map(|j| 2.0 * (std::f64::consts::PI * j as f64 / m as f64).cos())
            .collect();
        // log-product of distances from each candidate to the chosen points
        let mut score = vec![0.0_f64; candidates.len()];
        let mut taken = vec![false; candidates.len()];
        let mut points = Vec::with_capacity(LEJA_POINTS);
        let mut next = 0; // candidate 0 is +2
        for _ in 0..LEJA_POINTS {
            taken[next] = true;
            let p = candidates[next];
            points.push(p);
            let mut best = usize::MAX;
            let mut best_score = f64::NEG_INFINITY;
            for (i, &c) in candidates.iter().enumerate() {
                if taken[i] {
                    continue;
                }
                score[i] += (c - p).abs().ln();
                if score[i] > best_score {
                    best_score = score[i];
                    best = i;
                }
            }
            next = best;
        }
        points
    })
}

/// Divided differences of f(y) = exp(-i tau y) on the Leja points.
fn newton_coefficients(tau: f64, count: usize) -> Vec<Complex64> {
    let y = &leja_points()[..count];
    let f = |v: f64| Complex64::from_polar(1.0, -tau * v);
    let mut a: Vec<Complex64> = Vec::with_capacity(count);
    for k in 0..count {
        let mut value = Complex64::new(0.0, 0.0);
        let mut prod = 1.0;
        for (l, coeff) in a.iter().enumerate() {
            if l > 0 {
                prod *= y[k] - y[l - 1];
            }
            value += coeff * prod;
        }
        if k > 0 {
            prod *= y[k] - y[k - 1];
        }
        a.push((f(y[k]) - value) / prod);
    }
    a
}

/// Tridiagonal factors of one parity block of L / s.
struct BlockOperator {
    rows: usize,
    cols: usize,
    /// Sector diagonals and couplings, already divided by s.
    row_diag: Vec<f64>,
    col_diag: Vec<f64>,
    col_off: Vec<f64>,
    /// row_off shifted so that entry i multiplies w_{i-1} or w_{i+1}.
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    zero_col: Vec<f64>,
}

impl BlockOperator {
    fn new(h: &RadialHamiltonian, row_parity: usize, col_parity: usize, inv_s: f64) -> Self {
        let sector = |p: usize| -> (Vec<f64>, Vec<f64>) {
            let diag: Vec<f64> = h
                .diag
                .iter()
                .skip(p)
                .step_by(2)
                .map(|v| v * inv_s)
                .collect();
            let off: Vec<f64> = h
                .off2
                .iter()
                .skip(p)
                .step_by(2)
                .map(|v| v * inv_s)
                .collect();
            (diag, off)
        };
        let (row_diag, row_off) = sector(row_parity);
        let (col_diag, col_off) = sector(col_parity);
        let rows = row_diag.len();
        let mut row_lower = vec![0.0; rows];
        let mut row_upper = vec![0.0; rows];
        for (i, &u) in row_off.iter().enumerate() {
            row_upper[i] = u;
            row_lower[i + 1] = u;
        }
        BlockOperator {
            rows,
            cols: col_diag.len(),
            row_lower,
            row_upper,
            zero_col: vec![0.0; rows],
            row_diag,
            col_diag,
            col_off,
        }
    }

    /// One Newton order on a split-complex block: next = (L / s - y) w and
    /// acc += a next, in a single sweep over the columns.
    fn advance(
        &self,
        shift: f64,
        a: Complex64,
        w: (&[f64], &[f64]),
        next: (&mut [f64], &mut [f64]),
        acc: (&mut [f64], &mut [f64]),
    ) {
        let r = self.rows;
        let task_cols = if r * self.cols > PARALLEL_ELEMENTS {
            (PARALLEL_ELEMENTS / r.max(1)).max(1)
        } else {
            self.cols.max(1)
        };
        let chunk = r * task_cols;
        next.0
            .par_chunks_mut(chunk)
            .zip(next.1.par_chunks_mut(chunk))
            .zip(acc.0.par_chunks_mut(chunk))
            .zip(acc.1.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(task, (((nr, ni), ar), ai))| {
                let first = task * task_cols;
                let cols = nr
                    .chunks_mut(r)
                    .zip(ni.chunks_mut(r))
                    .zip(ar.chunks_mut(r))
                    .zip(ai.chunks_mut(r));
                // zero-padded copies of the current column, reused across columns
                let mut pad = (vec![0.0; r + 2], vec![0.0; r + 2]);
                for (local, (((nr, ni), ar), ai)) in cols.enumerate() {
                    self.column(first + local, shift, a, w, &mut pad, (nr, ni), (ar, ai));
                }
            });
    }

    #[inline]
    fn column(
        &self,
        j: usize,
        shift: f64,
        a: Complex64,
        w: (&[f64], &[f64]),
        pad: &mut (Vec<f64>, Vec<f64>),
        out: (&mut [f64], &mut [f64]),
        acc: (&mut [f64], &mut [f64]),
    ) {
        let r = self.rows;
        let (wr, wi) = w;
        let zeros = &self.zero_col[..];
        let (um, pr_m, pi_m) = if j > 0 {
            (
                self.col_off[j - 1],
                column_of(wr, j - 1, r),
                column_of(wi, j - 1, r),
            )
        } else {
            (0.0, zeros, zeros)
        };
        let (up, pr_p, pi_p) = if j + 1 < self.cols {
            (
                self.col_off[j],
                column_of(wr, j + 1, r),
                column_of(wi, j + 1, r),
            )
        } else {
            (0.0, zeros, zeros)
        };
        let (cr, ci) = (column_of(wr, j, r), column_of(wi, j, r));
        let scale = self.col_diag[j] + shift;
        let (o_r, o_i) = out;
        let (acc_r, acc_i) = acc;
        let d = &self.row_diag[..r];
        let lo = &self.row_lower[..r];
        let hi = &self.row_upper[..r];
        let (pr_m, pi_m, pr_p, pi_p) = (&pr_m[..r], &pi_m[..r], &pr_p[..r], &pi_p[..r]);
        let (o_r, o_i, acc_r, acc_i) = (
            &mut o_r[..r],
            &mut o_i[..r],
            &mut acc_r[..r],
            &mut acc_i[..r],
        );
        // H_a w couples row i to rows i - 1 and i + 1 of the same column;
        // the padded copy lets one loop cover all rows.
        let (pad_r, pad_i) = (&mut pad.0[..r + 2], &mut pad.1[..r + 2]);
        pad_r[1..=r].copy_from_slice(cr);
        pad_i[1..=r].copy_from_slice(ci);
        let (br, bi) = (&pad_r[..r], &pad_i[..r]);
        let (ar, ai) = (&pad_r[2..r + 2], &pad_i[2..r + 2]);
        let (cr, ci) = (&cr[..r], &ci[..r]);
        for i in 0..r {
            let diag = d[i] - scale;
            let xr = diag * cr[i] + lo[i] * br[i] + hi[i] * ar[i] - um * pr_m[i] - up * pr_p[i];
            let xi = diag * ci[i] + lo[i] * bi[i] + hi[i] * ai[i] - um * pi_m[i] - up * pi_p[i];
            o_r[i] = xr;
            o_i[i] = xi;
            acc_r[i] += a.re * xr - a.im * xi;
            acc_i[i] += a.re * xi + a.im * xr;
        }
    }
}

/// Far off-diagonal coherences decay geometrically and would otherwise
/// sink into subnormal numbers, which are very slow to compute with.
#[inline]
fn flush(v: f64) -> f64 {
    if v.abs() < FLUSH_BELOW {
        0.0
    } else {
        v
    }
}

#[inline]
fn column_of(m: &[f64], k: usize, r: usize) -> &[f64] {
    &m[k * r..(k + 1) * r]
}

fn frobenius_sq(v: &[f64]) -> f64 {
    let mut lanes = [0.0_f64; 4];
    let chunks = v.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        for k in 0..4 {
            lanes[k] += c[k] * c[k];
        }
    }
    lanes.iter().sum::<f64>() + rest.iter().map(|x| x * x).sum::<f64>()
}

/// Runs the Newton series on one parity block given as split real and
/// imaginary parts. Returns the propagated block.
fn propagate_block(
    op: &BlockOperator,
    coeffs: &[Complex64],
    ncfg: &NewtonConfig,
    mut wr: Vec<f64>,
    mut wi: Vec<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = wr.len();
    let y = leja_points();
    let a0 = coeffs[0];
    let mut accr: Vec<f64> = wr
        .iter()
        .zip(&wi)
        .map(|(&r, &i)| a0.re * r - a0.im * i)
        .collect();
    let mut acci: Vec<f64> = wr
        .iter()
        .zip(&wi)
        .map(|(&r, &i)| a0.re * i + a0.im * r)
        .collect();
    let mut nr = vec![0.0; len];
    let mut ni = vec![0.0; len];
    let mut small_terms = 0;
    let mut last_term = f64::INFINITY;
    for k in 0..ncfg.max_order {
        let a = coeffs[k + 1];
        op.advance(
            y[k],
            a,
            (&wr, &wi),
            (&mut nr, &mut ni),
            (&mut accr, &mut acci),
        );
        std::mem::swap(&mut wr, &mut nr);
        std::mem::swap(&mut wi, &mut ni);
        let magnitude = a.norm();
        if magnitude < ncfg.coeff_tolerance * 1e4 || k + 1 == ncfg.max_order {
            let norm = (frobenius_sq(&wr) + frobenius_sq(&wi)).sqrt();
            last_term = magnitude * norm;
            if last_term < ncfg.coeff_tolerance {
                small_terms += 1;
                if small_terms >= 2 && k >= 2 {
                    return Ok((accr, acci));
                }
            } else {
                small_terms = 0;
            }
        } else {
            small_terms = 0;
        }
    }
    Err(Error::NonConvergence {
        max_order: ncfg.max_order,
        last_term,
    })
}

/// Advances `state` by `step` with the Newton propagator, holding H(z) fixed.
pub fn newton_propagate(
    state: &RadialState,
    step: &PropagationStep,
    cfg: &TrapConfig,
    ncfg: &NewtonConfig,
) -> Result<RadialState> {
    step.validate_for(cfg)?;
    let h = RadialHamiltonian::new(state.dim(), step.z, cfg)?;
    propagate_with_hamiltonian(state, &h, step.dt(), ncfg)
}

/// Advances `state` by the signed time `dt` under a prebuilt Hamiltonian.
pub fn propagate_with_hamiltonian(
    state: &RadialState,
    h: &RadialHamiltonian,
    dt: f64,
    ncfg: &NewtonConfig,
) -> Result<RadialState> {
    ncfg.validate()?;
    let dim = state.dim();
    if h.dim() != dim {
        return Err(Error::InvalidConfig(format!(
            "Hamiltonian dimension {} does not match state dimension {dim}",
            h.dim()
        )));
    }
    let (lo, hi) = h.spectral_bounds();
    let half_width = ncfg.spectral_margin * (hi - lo);
    if half_width <= 0.0 || dt == 0.0 {
        return Ok(state.clone());
    }
    // x = s y maps [-2, 2] onto [-half_width, half_width].
    let s = 0.5 * half_width;
    let coeffs = newton_coefficients(s * dt, ncfg.max_order + 1);
    let rho = state.matrix();
    let mut out = CMatrix::zeros(dim, dim);
    for row_parity in 0..2 {
        for col_parity in 0..2 {
            let op = BlockOperator::new(h, row_parity, col_parity, 1.0 / s);
            let (rows, cols) = (op.rows, op.cols);
            if rows == 0 || cols == 0 {
                continue;
            }
            let mut wr = Vec::with_capacity(rows * cols);
            let mut wi = Vec::with_capacity(rows * cols);
            for l in 0..cols {
                for k in 0..rows {
                    let c = rho[(row_parity + 2 * k, col_parity + 2 * l)];
                    wr.push(c.re);
                    wi.push(c.im);
                }
            }
            if wr.iter().chain(&wi).all(|&v| v == 0.0) {
                continue;
            }
            let (br, bi) = propagate_block(&op, &coeffs, ncfg, wr, wi)?;
            for l in 0..cols {
                for k in 0..rows {
                    let idx = l * rows + k;
                    out[(row_parity + 2 * k, col_parity + 2 * l)] =
                        Complex64::new(flush(br[idx]), flush(bi[idx]));
                }
            }
        }
    }
    Ok(RadialState::from_matrix_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leja_sequence_starts_at_extremes_and_zero() {
        let y = leja_points();
        assert_eq!(y[0], 2.0);
        assert!((y[1] + 2.0).abs() < 1e-15);
        assert!(y[2].abs() < 1e-12);
        assert!(y.iter().all(|v| v.abs() <= 2.0));
    }

    #[test]
    fn newton_interpolant_reproduces_exponential() {
        let tau = 3.7;
        let count = 60;
        let a = newton_coefficients(tau, count);
        let y = leja_points();
        for &t in &[-1.9, -0.3, 0.0, 0.77, 1.99] {
            let mut value = Complex64::new(0.0, 0.0);
            let mut basis = 1.0;
            for (k, c) in a.iter().enumerate() {
                value += c * basis;
                basis *= t - y[k];
            }
            let exact = Complex64::from_polar(1.0, -tau * t);
            assert!((value - exact).norm() < 1e-13, "y = {t}");
        }
    }

    #[test]
    fn config_validation() {
        NewtonConfig::default().validate().unwrap();
        let bad = NewtonConfig {
            max_order: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = NewtonConfig {
            coeff_tolerance: 1e-3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
