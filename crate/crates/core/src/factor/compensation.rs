//! Diagonal compensation of truncated Schur updates.

use crate::dense::{symmetric_truncate, DenseTile};
#[cfg(test)]
use crate::dense::mul_nt;
use crate::error::Result;

/// Diagonal correction for replacing `dk` by its `eps`-truncation `D̄k`:
/// `diag(rowsum |dk - D̄k|)`.
pub fn schur_compensation(dk: &DenseTile, eps: f64) -> Result<DenseTile> {
    Ok(compensate(dk, eps)?.0)
}

/// The correction and `‖dk - D̄k‖_F`.
pub(crate) fn compensate(dk: &DenseTile, eps: f64) -> Result<(DenseTile, f64)> {
    let n = dk.rows();
    let mut sym = dk.clone();
    sym.symmetrize_from_lower();
    let diff = sym.sub(&symmetric_truncate(&sym, eps)?)?;
    let mut corr = DenseTile::zeros(n, n);
    for i in 0..n {
        let s: f64 = (0..n).map(|j| diff.get(i, j).abs()).sum();
        corr.set(i, i, s);
    }
    Ok((corr, diff.frobenius_norm()))
}
