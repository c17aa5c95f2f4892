//! Thin and truncated singular value decompositions.

use super::{clear_upper_simd_state, mul_nt, DenseTile};
use crate::error::{dim_err, Result, TlrError};

/// Thin SVD `a = U diag(s) Vᵀ` with singular values in nonincreasing order.
pub fn thin_svd(a: &DenseTile) -> Result<(DenseTile, Vec<f64>, DenseTile)> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok((DenseTile::zeros(a.rows(), 0), Vec::new(), DenseTile::zeros(a.cols(), 0)));
    }
    if !a.is_finite() {
        return Err(TlrError::Data("non-finite entry in svd input".into()));
    }
    let svd = a
        .view()
        .thin_svd()
        .map_err(|e| TlrError::Data(format!("svd did not converge: {e:?}")));
    clear_upper_simd_state();
    let svd = svd?;
    let s = svd.S().column_vector();
    let sigma: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((DenseTile::from_faer(svd.U()), sigma, DenseTile::from_faer(svd.V())))
}

/// Rank-revealing truncation `a ≈ U Vᵀ` keeping singular values above `eps`.
#[derive(Clone, Debug)]
pub struct Truncation {
    /// Left factor, columns scaled by the kept singular values.
    pub u: DenseTile,
    /// Right factor with orthonormal columns.
    pub v: DenseTile,
    /// All singular values of the input.
    pub sigma: Vec<f64>,
}

impl Truncation {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }
}

/// Truncated SVD with absolute threshold `eps` on the singular values.
pub fn svd_truncate(a: &DenseTile, eps: f64) -> Result<Truncation> {
    let (mut u, sigma, mut v) = thin_svd(a)?;
    let k = sigma.iter().take_while(|&&s| s > eps).count();
    u.truncate_columns(k);
    v.truncate_columns(k);
    for (j, &s) in sigma.iter().take(k).enumerate() {
        u.col_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    Ok(Truncation { u, v, sigma })
}

/// `Σ λ v vᵀ` over the eigenpairs of the symmetric `a` with `|λ| > eps`
/// (lower triangle read). For symmetric input this is the reconstruction of
/// [`svd_truncate`].
pub fn symmetric_truncate(a: &DenseTile, eps: f64) -> Result<DenseTile> {
    let n = a.rows();
    if a.cols() != n {
        return Err(dim_err(format!("symmetric truncation of {}x{}", n, a.cols())));
    }
    if !a.is_finite() {
        return Err(TlrError::Data("non-finite entry in eigendecomposition input".into()));
    }
    let e = a
        .view()
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|err| TlrError::Data(format!("eigendecomposition failed: {err:?}")));
    clear_upper_simd_state();
    let e = e?;
    let lambda = e.S().column_vector();
    let vecs = DenseTile::from_faer(e.U());
    let keep: Vec<usize> = (0..n).filter(|&i| lambda[i].abs() > eps).collect();
    let mut v = DenseTile::zeros(n, keep.len());
    let mut vl = DenseTile::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        v.col_mut(c).copy_from_slice(vecs.col(i));
        vl.col_mut(c).iter_mut().zip(vecs.col(i)).for_each(|(d, s)| *d = s * lambda[i]);
    }
    Ok(mul_nt(&vl, &v))
}
