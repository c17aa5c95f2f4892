//! Blocked triangular solves with a lower triangular factor.

use faer::prelude::{Reborrow, ReborrowMut};

use super::{gemm_into, DenseTile, Transpose};
use crate::error::{dim_err, Result, TlrError};

const BLOCK: usize = 64;

/// Which side the triangular factor multiplies from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Solve `op(L) X = B`.
    Left,
    /// Solve `X op(L) = B`.
    Right,
}

/// Whether the diagonal of the factor is taken as stored or as ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diag {
    NonUnit,
    Unit,
}

/// Solves a triangular system with the lower triangular `l`.
///
/// Only the lower triangle of `l` is read. An exactly zero diagonal entry
/// yields [`TlrError::Singular`].
pub fn dense_trsm(
    l: &DenseTile,
    b: &DenseTile,
    side: Side,
    trans: Transpose,
    diag: Diag,
) -> Result<DenseTile> {
    let mut x = b.clone();
    trsm_in_place(l, &mut x, side, trans, diag)?;
    Ok(x)
}

/// In-place form of [`dense_trsm`].
pub fn trsm_in_place(
    l: &DenseTile,
    x: &mut DenseTile,
    side: Side,
    trans: Transpose,
    diag: Diag,
) -> Result<()> {
    let n = l.rows();
    if l.cols() != n {
        return Err(dim_err(format!("triangular factor is {}x{}", n, l.cols())));
    }
    let inner = match side {
        Side::Left => x.rows(),
        Side::Right => x.cols(),
    };
    if inner != n {
        return Err(dim_err(format!(
            "factor of order {n} against a {}x{} right-hand side",
            x.rows(),
            x.cols()
        )));
    }
    if diag == Diag::NonUnit {
        if let Some(index) = (0..n).find(|&i| l.get(i, i) == 0.0) {
            return Err(TlrError::Singular { index });
        }
    }
    match (side, trans) {
        (Side::Left, Transpose::No) => forward(l, x, diag),
        (Side::Left, Transpose::Yes) => backward(l, x, diag),
        (Side::Right, t) => {
            // X op(L) = B  <=>  op(L)ᵀ Xᵀ = Bᵀ
            let mut xt = x.transpose();
            match t {
                Transpose::No => backward(l, &mut xt, diag),
                Transpose::Yes => forward(l, &mut xt, diag),
            }
            *x = xt.transpose();
        }
    }
    Ok(())
}

fn forward(l: &DenseTile, x: &mut DenseTile, diag: Diag) {
    let n = l.rows();
    let m = x.cols();
    let mut r0 = 0;
    while r0 < n {
        let r1 = (r0 + BLOCK).min(n);
        if r0 > 0 {
            let mut xv = x.view_mut();
            let (top, bottom) = xv.rb_mut().split_at_row_mut(r0);
            gemm_into(
                bottom.submatrix_mut(0, 0, r1 - r0, m),
                true,
                l.view().submatrix(r0, 0, r1 - r0, r0),
                top.rb(),
                -1.0,
            );
        }
        for c in 0..m {
            let col = x.col_mut(c);
            for t in r0..r1 {
                if diag == Diag::NonUnit {
                    col[t] /= l.get(t, t);
                }
                let xt = col[t];
                if xt != 0.0 {
                    let lc = &l.col(t)[t + 1..r1];
                    for (xi, lit) in col[t + 1..r1].iter_mut().zip(lc) {
                        *xi -= lit * xt;
                    }
                }
            }
        }
        r0 = r1;
    }
}

fn backward(l: &DenseTile, x: &mut DenseTile, diag: Diag) {
    let n = l.rows();
    let m = x.cols();
    let mut r1 = n;
    while r1 > 0 {
        let r0 = r1.saturating_sub(BLOCK);
        if r1 < n {
            let mut xv = x.view_mut();
            let (top, bottom) = xv.rb_mut().split_at_row_mut(r1);
            gemm_into(
                top.submatrix_mut(r0, 0, r1 - r0, m),
                true,
                l.view().submatrix(r1, r0, n - r1, r1 - r0).transpose(),
                bottom.rb(),
                -1.0,
            );
        }
        for c in 0..m {
            let col = x.col_mut(c);
            for t in (r0..r1).rev() {
                let lc = &l.col(t)[t + 1..r1];
                let dot: f64 = lc.iter().zip(&col[t + 1..r1]).map(|(a, b)| a * b).sum();
                col[t] -= dot;
                if diag == Diag::NonUnit {
                    col[t] /= l.get(t, t);
                }
            }
        }
        r1 = r0;
    }
}
