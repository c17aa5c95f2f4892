//! Block Gram-Schmidt with two sweeps and Cholesky QR panels.

use rand_chacha::ChaCha8Rng;

use super::trsm::{trsm_in_place, Diag, Side};
use super::{dense_cholesky, gemm, mul_tn, DenseTile, Transpose};
use crate::error::{dim_err, Result};
use crate::rng::gaussian_tile;

/// Result of [`orthog`].
#[derive(Clone, Debug)]
pub struct Orthogonalized {
    /// New orthonormal columns, orthogonal to the existing basis.
    pub q: DenseTile,
    /// `qᵀ W`, where `W` is the input block projected off the existing basis.
    pub r: DenseTile,
    /// Coefficients `Qᵀ Y` of the input block on the existing basis.
    pub projection: DenseTile,
    /// Number of numerically dependent input columns replaced by random ones.
    pub replaced: usize,
}

/// Smallest Cholesky pivot (of the column-scaled Gram matrix) accepted on
/// the fast path.
const MIN_GRAM_PIVOT: f64 = 1e-6;

/// Orthogonalizes `y` against the orthonormal columns of `q`.
///
/// Columns of `y` that are numerically dependent on `q` or on each other are
/// replaced by random directions drawn from `rng`, so the returned block
/// always has full column rank. Their entries of `r` come out at roundoff
/// level.
pub fn orthog(q: &DenseTile, y: &DenseTile, rng: &mut ChaCha8Rng) -> Result<Orthogonalized> {
    let m = y.rows();
    let s = y.cols();
    if q.cols() > 0 && q.rows() != m {
        return Err(dim_err(format!("basis has {} rows, block has {m}", q.rows())));
    }
    if q.cols() + s > m {
        return Err(dim_err(format!(
            "cannot extend a basis of {} columns by {s} in dimension {m}",
            q.cols()
        )));
    }
    let (w1, projection) = project(q, y);
    let tol = 1e2 * f64::EPSILON * y.frobenius_norm();
    let (first, replaced) = panel_qr(q, &w1, tol, rng);
    let (w2, _) = project(q, &first);
    let q_new = match chol_qr(&w2) {
        Some(q2) => q2,
        None => panel_qr(q, &w2, 0.0, rng).0,
    };
    let r = mul_tn(&q_new, &w1);
    Ok(Orthogonalized { q: q_new, r, projection, replaced })
}

/// One projection `y - Q Qᵀ y`, with its coefficients.
fn project(q: &DenseTile, y: &DenseTile) -> (DenseTile, DenseTile) {
    if q.cols() == 0 {
        return (y.clone(), DenseTile::zeros(0, y.cols()));
    }
    let mut w = y.clone();
    let coef = mul_tn(q, &w);
    gemm(-1.0, q, Transpose::No, &coef, Transpose::No, 1.0, &mut w).expect("shapes agree");
    (w, coef)
}

/// Orthonormal basis of the columns of `w` (already projected off `q`).
/// One Cholesky QR pass on the fast path; the second block sweep restores
/// orthogonality.
fn panel_qr(q: &DenseTile, w: &DenseTile, tol: f64, rng: &mut ChaCha8Rng) -> (DenseTile, usize) {
    let healthy = (0..w.cols()).all(|j| norm(w.col(j)) > tol.max(f64::MIN_POSITIVE));
    if healthy {
        if let Some(q1) = chol_qr(w) {
            return (q1, 0);
        }
    }
    gram_schmidt_with_replacement(q, w, tol, rng)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One Cholesky QR pass on the column-scaled block, or `None` if the Gram
/// matrix is too ill conditioned.
fn chol_qr(w: &DenseTile) -> Option<DenseTile> {
    let mut ws = w.clone();
    for j in 0..ws.cols() {
        let n = norm(ws.col(j));
        ws.col_mut(j).iter_mut().for_each(|x| *x /= n);
    }
    let g = mul_tn(&ws, &ws);
    let l = dense_cholesky(&g).ok()?;
    if (0..l.rows()).any(|i| l.get(i, i) < MIN_GRAM_PIVOT) {
        return None;
    }
    trsm_in_place(&l, &mut ws, Side::Right, Transpose::Yes, Diag::NonUnit).ok()?;
    Some(ws)
}

/// Column by column Gram-Schmidt with reorthogonalization. Dependent columns
/// are replaced by random vectors deflated against the basis built so far.
fn gram_schmidt_with_replacement(
    q: &DenseTile,
    w: &DenseTile,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> (DenseTile, usize) {
    let m = w.rows();
    let mut out = DenseTile::zeros(m, 0);
    let mut replaced = 0;
    for j in 0..w.cols() {
        let mut v = DenseTile::column_vector(w.col(j));
        let n0 = norm(v.data());
        let mut ok = n0 > tol.max(f64::MIN_POSITIVE);
        if ok {
            v = two_sided(q, &out, v);
            ok = norm(v.data()) > 1e-8 * n0;
        }
        while !ok {
            replaced += 1;
            v = two_sided(q, &out, gaussian_tile(rng, m, 1));
            ok = norm(v.data()) > 1e-8;
        }
        let n = norm(v.data());
        v.data_mut().iter_mut().for_each(|x| *x /= n);
        out.append_columns(&v).expect("same row count");
    }
    (out, replaced)
}

fn two_sided(q: &DenseTile, built: &DenseTile, v: DenseTile) -> DenseTile {
    let mut v = v;
    for _ in 0..2 {
        for basis in [q, built] {
            if basis.cols() > 0 {
                let c = mul_tn(basis, &v);
                gemm(-1.0, basis, Transpose::No, &c, Transpose::No, 1.0, &mut v)
                    .expect("shapes agree");
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::mul;
    use crate::rng::stream;

    fn orthogonality(q: &DenseTile) -> f64 {
        mul_tn(q, q).max_abs_diff(&DenseTile::identity(q.cols()))
    }

    #[test]
    fn fresh_block_is_orthonormalized() {
        let mut rng = stream(1, &[]);
        let y = gaussian_tile(&mut rng, 50, 8);
        let o = orthog(&DenseTile::zeros(50, 0), &y, &mut rng).unwrap();
        assert!(orthogonality(&o.q) < 1e-14);
        assert_eq!(o.replaced, 0);
        assert!(mul(&o.q, &o.r).max_abs_diff(&y) < 1e-12);
    }

    #[test]
    fn block_is_orthogonal_to_existing_basis() {
        let mut rng = stream(2, &[]);
        let q0 = orthog(&DenseTile::zeros(60, 0), &gaussian_tile(&mut rng, 60, 10), &mut rng)
            .unwrap()
            .q;
        let y = gaussian_tile(&mut rng, 60, 6);
        let o = orthog(&q0, &y, &mut rng).unwrap();
        assert!(mul_tn(&q0, &o.q).max_abs() < 1e-14);
        let mut back = mul(&q0, &o.projection);
        back.axpy(1.0, &mul(&o.q, &o.r)).unwrap();
        assert!(back.max_abs_diff(&y) < 1e-12);
    }

    #[test]
    fn dependent_columns_are_replaced() {
        let mut rng = stream(3, &[]);
        let q0 = orthog(&DenseTile::zeros(40, 0), &gaussian_tile(&mut rng, 40, 5), &mut rng)
            .unwrap()
            .q;
        // first two columns live in span(q0), the third duplicates the fourth
        let mut y = mul(&q0, &gaussian_tile(&mut rng, 5, 2));
        let extra = gaussian_tile(&mut rng, 40, 1);
        y.append_columns(&extra).unwrap();
        y.append_columns(&extra).unwrap();
        let o = orthog(&q0, &y, &mut rng).unwrap();
        assert_eq!(o.replaced, 3);
        assert!(orthogonality(&o.q) < 1e-13);
        assert!(mul_tn(&q0, &o.q).max_abs() < 1e-13);
        for j in [0, 1] {
            assert!(norm(o.r.col(j)) < 1e-12 * y.frobenius_norm());
        }
    }

    #[test]
    fn overfull_basis_is_rejected() {
        let mut rng = stream(4, &[]);
        let y = gaussian_tile(&mut rng, 4, 5);
        assert!(orthog(&DenseTile::zeros(4, 0), &y, &mut rng).is_err());
    }
}
