//! Triangular solves, full solves, preconditioned CG and residual
//! estimation on top of a [`TlrFactor`].
//!
//! Vectors are in the ordering of `A`. The triangular sweeps work in the
//! factor's own (possibly pivoted) tile order; [`factor_solve`] and
//! [`factor_apply`] translate between the two.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dense::{trsm_in_place, DenseTile, Diag, Side, Transpose};
use crate::error::{dim_err, Result, TlrError};
use crate::factor::TlrFactor;
use crate::rng::{gaussian_tile, stream};
use crate::tlr::{tlr_matvec, TlrMatrix};

/// Power iterations used when no count is given.
pub const DEFAULT_POWER_ITERATIONS: usize = 50;

/// CG iterations between explicit residual recomputations.
pub const RESIDUAL_RECOMPUTE_INTERVAL: usize = 50;

fn split(f: &TlrFactor, x: &[f64]) -> Vec<Vec<f64>> {
    let l = f.l();
    (0..l.nb()).map(|k| x[l.offset(k)..l.offset(k) + l.tile_rows(k)].to_vec()).collect()
}

fn check_len(f: &TlrFactor, x: &[f64]) -> Result<()> {
    if x.len() != f.n() {
        return Err(dim_err(format!("vector of length {} for order {}", x.len(), f.n())));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves with the dense diagonal block `k` (`L_k`, or `P_kᵀ L_k` for
/// `LDLᵀ`), or its transpose.
fn diag_solve(f: &TlrFactor, k: usize, r: &[f64], trans: Transpose) -> Result<Vec<f64>> {
    let blk = f.d_blocks().map(|d| &d[k]);
    let unit = if blk.is_some() { Diag::Unit } else { Diag::NonUnit };
    let rhs = match (blk, trans) {
        (Some(b), Transpose::No) => b.permute(r),
        _ => r.to_vec(),
    };
    let mut x = DenseTile::column_vector(&rhs);
    trsm_in_place(f.l().diag(k), &mut x, Side::Left, trans, unit).map_err(|e| match e {
        TlrError::Singular { .. } => TlrError::Singular { index: k },
        e => e,
    })?;
    let x = x.into_data();
    Ok(match (blk, trans) {
        (Some(b), Transpose::Yes) => b.unpermute(&x),
        _ => x,
    })
}

/// Product with the dense diagonal block `k`, or its transpose.
fn diag_apply(f: &TlrFactor, k: usize, x: &[f64], trans: Transpose) -> Vec<f64> {
    let t = f.l().diag(k);
    let n = x.len();
    let blk = f.d_blocks().map(|d| &d[k]);
    let input = match (blk, trans) {
        (Some(b), Transpose::Yes) => b.permute(x),
        _ => x.to_vec(),
    };
    let mut y = vec![0.0; n];
    for c in 0..n {
        let xc = input[c];
        match trans {
            Transpose::No => {
                for r in c..n {
                    let v = if blk.is_some() && r == c { 1.0 } else { t.get(r, c) };
                    y[r] += v * xc;
                }
            }
            Transpose::Yes => {
                let col = t.col(c);
                let mut s = if blk.is_some() { input[c] } else { col[c] * input[c] };
                for r in c + 1..n {
                    s += col[r] * input[r];
                }
                y[c] = s;
            }
        }
    }
    match (blk, trans) {
        (Some(b), Transpose::No) => b.unpermute(&y),
        _ => y,
    }
}

/// Solves `L x = y` by forward substitution in the factor's tile order.
///
/// After each diagonal solve, the blocks below are updated in parallel with
/// `U(i,k) (V(i,k)ᵀ x_k)`.
pub fn tlr_trsm_lower(f: &TlrFactor, y: &[f64]) -> Result<Vec<f64>> {
    check_len(f, y)?;
    let l = f.l();
    let nb = l.nb();
    let mut r = split(f, y);
    for k in 0..nb {
        let xk = diag_solve(f, k, &r[k], Transpose::No)?;
        let (_, below) = r.split_at_mut(k + 1);
        below.par_iter_mut().enumerate().for_each(|(o, ri)| {
            let t = l.lower(k + 1 + o, k);
            if t.rank() > 0 {
                let mut w = vec![0.0; t.rank()];
                t.v.gemv_add(Transpose::Yes, 1.0, &xk, &mut w);
                t.u.gemv_add(Transpose::No, -1.0, &w, ri);
            }
        });
        r[k] = xk;
    }
    Ok(r.concat())
}

/// Solves `Lᵀ x = y` by backward substitution in the factor's tile order.
pub fn tlr_trsm_upper(f: &TlrFactor, y: &[f64]) -> Result<Vec<f64>> {
    check_len(f, y)?;
    let l = f.l();
    let nb = l.nb();
    let mut r = split(f, y);
    for k in (0..nb).rev() {
        let xk = diag_solve(f, k, &r[k], Transpose::Yes)?;
        let (above, _) = r.split_at_mut(k);
        above.par_iter_mut().enumerate().for_each(|(j, rj)| {
            let t = l.lower(k, j);
            if t.rank() > 0 {
                let mut w = vec![0.0; t.rank()];
                t.u.gemv_add(Transpose::Yes, 1.0, &xk, &mut w);
                t.v.gemv_add(Transpose::No, -1.0, &w, rj);
            }
        });
        r[k] = xk;
    }
    Ok(r.concat())
}

/// `y = L x` in the factor's tile order.
pub fn factor_matvec_lower(f: &TlrFactor, x: &[f64]) -> Result<Vec<f64>> {
    check_len(f, x)?;
    let l = f.l();
    let xs = split(f, x);
    let ys: Vec<Vec<f64>> = (0..l.nb())
        .into_par_iter()
        .map(|i| {
            let mut y = diag_apply(f, i, &xs[i], Transpose::No);
            for (j, xj) in xs.iter().enumerate().take(i) {
                let t = l.lower(i, j);
                if t.rank() > 0 {
                    let mut w = vec![0.0; t.rank()];
                    t.v.gemv_add(Transpose::Yes, 1.0, xj, &mut w);
                    t.u.gemv_add(Transpose::No, 1.0, &w, &mut y);
                }
            }
            y
        })
        .collect();
    Ok(ys.concat())
}

/// `y = Lᵀ x` in the factor's tile order.
pub fn factor_matvec_upper(f: &TlrFactor, x: &[f64]) -> Result<Vec<f64>> {
    check_len(f, x)?;
    let l = f.l();
    let nb = l.nb();
    let xs = split(f, x);
    let ys: Vec<Vec<f64>> = (0..nb)
        .into_par_iter()
        .map(|j| {
            let mut y = diag_apply(f, j, &xs[j], Transpose::Yes);
            for (i, xi) in xs.iter().enumerate().skip(j + 1) {
                let t = l.lower(i, j);
                if t.rank() > 0 {
                    let mut w = vec![0.0; t.rank()];
                    t.u.gemv_add(Transpose::Yes, 1.0, xi, &mut w);
                    t.v.gemv_add(Transpose::No, 1.0, &w, &mut y);
                }
            }
            y
        })
        .collect();
    Ok(ys.concat())
}

fn apply_d(f: &TlrFactor, x: &mut [f64], inverse: bool) -> Result<()> {
    if let Some(d) = f.d_blocks() {
        let l = f.l();
        for (k, blk) in d.iter().enumerate() {
            let seg = &mut x[l.offset(k)..l.offset(k) + l.tile_rows(k)];
            if inverse {
                blk.d.solve_vec(seg).map_err(|_| TlrError::Singular { index: k })?;
            } else {
                blk.d.apply_vec(seg);
            }
        }
    }
    Ok(())
}

fn to_factor_order(f: &TlrFactor, x: &[f64]) -> Vec<f64> {
    match f.perm() {
        None => x.to_vec(),
        Some(_) => f.row_map().iter().map(|&m| x[m]).collect(),
    }
}

fn from_factor_order(f: &TlrFactor, x: &[f64]) -> Vec<f64> {
    match f.perm() {
        None => x.to_vec(),
        Some(_) => {
            let mut y = vec![0.0; x.len()];
            for (r, &m) in f.row_map().iter().enumerate() {
                y[m] = x[r];
            }
            y
        }
    }
}

/// `x ≈ A⁻¹ b` through both triangular sweeps, the `D` solve in `LDLᵀ`
/// mode and the tile permutation in pivoted mode.
pub fn factor_solve(f: &TlrFactor, b: &[f64]) -> Result<Vec<f64>> {
    check_len(f, b)?;
    let y = to_factor_order(f, b);
    let mut z = tlr_trsm_lower(f, &y)?;
    apply_d(f, &mut z, true)?;
    let x = tlr_trsm_upper(f, &z)?;
    Ok(from_factor_order(f, &x))
}

/// `Pᵀ L D Lᵀ P x`: the matrix the factor represents, applied to `x`.
pub fn factor_apply(f: &TlrFactor, x: &[f64]) -> Result<Vec<f64>> {
    check_len(f, x)?;
    let y = to_factor_order(f, x);
    let mut t = factor_matvec_upper(f, &y)?;
    apply_d(f, &mut t, false)?;
    let u = factor_matvec_lower(f, &t)?;
    Ok(from_factor_order(f, &u))
}

/// Magnitude of the dominant eigenvalue of the symmetric operator `op` on
/// vectors of length `n`: `iters` power steps from a seeded Gaussian start,
/// then the Rayleigh quotient of the final iterate.
pub fn power_iteration(
    n: usize,
    iters: usize,
    seed: u64,
    mut op: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let mut g = stream(seed, &[0x9077]);
    let mut x = gaussian_tile(&mut g, n, 1).into_data();
    for _ in 0..iters.max(1) {
        let nx = norm(&x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= nx);
        x = op(&x)?;
    }
    let nx = norm(&x);
    if nx == 0.0 {
        return Ok(0.0);
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let y = op(&x)?;
    Ok(dot(&x, &y).abs())
}

/// Estimate of `‖A - Pᵀ L D Lᵀ P‖₂`.
pub fn estimate_2norm_diff(a: &TlrMatrix, f: &TlrFactor, iters: usize, seed: u64) -> Result<f64> {
    if a.n() != f.n() {
        return Err(dim_err(format!("matrix of order {} against a factor of order {}", a.n(), f.n())));
    }
    power_iteration(a.n(), iters, seed, |x| {
        let ax = tlr_matvec(a, x)?;
        let lx = factor_apply(f, x)?;
        Ok(ax.iter().zip(&lx).map(|(p, q)| p - q).collect())
    })
}

/// Estimate of `‖A‖₂`.
pub fn estimate_2norm(a: &TlrMatrix, iters: usize, seed: u64) -> Result<f64> {
    power_iteration(a.n(), iters, seed, |x| tlr_matvec(a, x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// `‖r_i‖ / ‖b‖` for `i = 0..=iterations`, starting from `x₀ = 0`.
    pub rel_residual_history: Vec<f64>,
    pub converged: bool,
    /// Time in products with `A`.
    pub apply_time: Duration,
    /// Time in preconditioner solves.
    pub solve_time: Duration,
}

/// Preconditioned conjugate gradients for `A x = b` with `M⁻¹ =
/// factor_solve(f, ·)`, stopping at `‖r‖/‖b‖ ≤ tol` or after `max_iter`
/// iterations. The residual is recomputed from `x` every
/// [`RESIDUAL_RECOMPUTE_INTERVAL`] iterations.
pub fn pcg(
    a: &TlrMatrix,
    f: Option<&TlrFactor>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = a.n();
    if b.len() != n {
        return Err(dim_err(format!("right-hand side of length {} for order {n}", b.len())));
    }
    if let Some(f) = f {
        if f.n() != n {
            return Err(dim_err(format!("preconditioner of order {} for order {n}", f.n())));
        }
    }
    if !(tol > 0.0) {
        return Err(crate::error::config_err("tolerance must be positive"));
    }
    let mut report = CgReport {
        iterations: 0,
        rel_residual_history: vec![],
        converged: false,
        apply_time: Duration::ZERO,
        solve_time: Duration::ZERO,
    };
    let mut x = vec![0.0; n];
    let bn = norm(b);
    if bn == 0.0 {
        report.rel_residual_history.push(0.0);
        report.converged = true;
        return Ok((x, report));
    }
    let precond = |r: &[f64], report: &mut CgReport| -> Result<Vec<f64>> {
        let t0 = Instant::now();
        let z = match f {
            Some(f) => factor_solve(f, r)?,
            None => r.to_vec(),
        };
        report.solve_time += t0.elapsed();
        Ok(z)
    };
    let matvec = |v: &[f64], report: &mut CgReport| -> Result<Vec<f64>> {
        let t0 = Instant::now();
        let y = tlr_matvec(a, v)?;
        report.apply_time += t0.elapsed();
        Ok(y)
    };

    let mut r = b.to_vec();
    report.rel_residual_history.push(1.0);
    if 1.0 <= tol {
        report.converged = true;
        return Ok((x, report));
    }
    let mut z = precond(&r, &mut report)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let q = matvec(&p, &mut report)?;
        let pq = dot(&p, &q);
        if !(pq.is_finite()) || pq == 0.0 {
            break;
        }
        let alpha = rz / pq;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        if it % RESIDUAL_RECOMPUTE_INTERVAL == 0 {
            let ax = matvec(&x, &mut report)?;
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        } else {
            r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        }
        let rel = norm(&r) / bn;
        report.iterations = it;
        report.rel_residual_history.push(rel);
        if rel <= tol {
            report.converged = true;
            break;
        }
        z = precond(&r, &mut report)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok((x, report))
}
