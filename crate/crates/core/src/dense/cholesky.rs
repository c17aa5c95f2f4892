//! Dense Cholesky, modified Cholesky and a tiled reference factorization.

use faer::prelude::{Reborrow, ReborrowMut};

use super::ldl::{dense_ldl, BlockDiagonal};
use super::trsm::{trsm_in_place, Diag, Side};
use super::{gemm, gemm_into, mul_nt, DenseTile, Transpose};
use crate::error::{dim_err, Result, TlrError};

const PANEL: usize = 64;

/// A nonpositive or non-finite pivot was met at `column`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CholeskyFailure {
    pub column: usize,
}

impl std::fmt::Display for CholeskyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "nonpositive pivot at column {}", self.column)
    }
}

impl std::error::Error for CholeskyFailure {}

/// Lower Cholesky factor of the symmetric positive definite `a`.
///
/// Only the lower triangle of `a` is read. The input is never modified.
///
/// # Panics
///
/// Panics if `a` is not square.
pub fn dense_cholesky(a: &DenseTile) -> std::result::Result<DenseTile, CholeskyFailure> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "cholesky of a non-square tile");
    let mut l = a.clone();
    let mut p0 = 0;
    while p0 < n {
        let p1 = (p0 + PANEL).min(n);
        if p0 > 0 {
            let mut m = l.view_mut();
            let (left, right) = m.rb_mut().split_at_col_mut(p0);
            let left = left.rb();
            gemm_into(
                right.submatrix_mut(p0, 0, n - p0, p1 - p0),
                true,
                left.submatrix(p0, 0, n - p0, p0),
                left.submatrix(p0, 0, p1 - p0, p0).transpose(),
                -1.0,
            );
        }
        let data = l.data_mut();
        for j in p0..p1 {
            let (head, tail) = data.split_at_mut(j * n);
            let cj = &mut tail[j..n];
            for t in p0..j {
                let ct = &head[t * n + j..t * n + n];
                let s = ct[0];
                if s != 0.0 {
                    for (x, y) in cj.iter_mut().zip(ct) {
                        *x -= s * y;
                    }
                }
            }
            let d = cj[0];
            if !(d > 0.0 && d.is_finite()) {
                return Err(CholeskyFailure { column: j });
            }
            let r = d.sqrt();
            cj[0] = r;
            let inv = 1.0 / r;
            cj[1..].iter_mut().for_each(|x| *x *= inv);
        }
        p0 = p1;
    }
    l.zero_upper();
    Ok(l)
}

/// Result of [`modified_cholesky`].
#[derive(Clone, Debug)]
pub struct ModifiedCholesky {
    pub l: DenseTile,
    /// Whether the input had to be modified to become positive definite.
    pub modified: bool,
    /// Eigenvalue floor applied to the `D` blocks when modified.
    pub floor: f64,
}

/// Cholesky factor of `a`, or of a nearby positive definite matrix.
///
/// When the plain factorization fails, `a` is factored as `Pᵀ L D Lᵀ P` with
/// Bunch-Kaufman pivoting, every eigenvalue of every `D` block is raised to
/// at least `2⁻²⁶ ‖a‖_F`, and the reassembled matrix is factored.
pub fn modified_cholesky(a: &DenseTile) -> Result<ModifiedCholesky> {
    if a.rows() != a.cols() {
        return Err(dim_err(format!("modified cholesky of {}x{}", a.rows(), a.cols())));
    }
    if !a.is_finite() {
        return Err(TlrError::Data("non-finite entry in a diagonal tile".into()));
    }
    if let Ok(l) = dense_cholesky(a) {
        return Ok(ModifiedCholesky { l, modified: false, floor: 0.0 });
    }
    let n = a.rows();
    let mut sym = a.clone();
    sym.symmetrize_from_lower();
    let norm = sym.frobenius_norm();
    let mut floor = f64::powi(2.0, -26) * if norm > 0.0 { norm } else { 1.0 };
    let ldl = dense_ldl(&sym)?;
    for _ in 0..30 {
        let lifted = ldl.d.with_eigenvalue_floor(floor);
        let mut ld = ldl.l.clone();
        lifted.apply_right(&mut ld);
        let m = mul_nt(&ld, &ldl.l);
        let mut shifted = DenseTile::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                shifted.set(ldl.perm[i], ldl.perm[j], m.get(i, j));
            }
        }
        if let Ok(l) = dense_cholesky(&shifted) {
            return Ok(ModifiedCholesky { l, modified: true, floor });
        }
        floor *= 4.0;
    }
    Err(TlrError::Data("modified cholesky did not reach a positive definite matrix".into()))
}

/// Left-looking tiled Cholesky of a dense matrix with tile size `b`.
///
/// This is a plain dense reference used to check the TLR drivers.
pub fn dense_tiled_cholesky_reference(
    a: &DenseTile,
    b: usize,
) -> std::result::Result<DenseTile, CholeskyFailure> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert!(b > 0);
    let nb = n.div_ceil(b);
    let range = |t: usize| (t * b, ((t + 1) * b).min(n));
    let block = |m: &DenseTile, r: (usize, usize), c: (usize, usize)| {
        DenseTile::from_fn(r.1 - r.0, c.1 - c.0, |i, j| m.get(r.0 + i, c.0 + j))
    };
    let mut l = DenseTile::zeros(n, n);
    for k in 0..nb {
        let rk = range(k);
        let mut akk = block(a, rk, rk);
        for j in 0..k {
            let lkj = block(&l, rk, range(j));
            gemm(-1.0, &lkj, Transpose::No, &lkj, Transpose::Yes, 1.0, &mut akk).unwrap();
        }
        let lkk = dense_cholesky(&akk).map_err(|f| CholeskyFailure { column: rk.0 + f.column })?;
        for i in k + 1..nb {
            let ri = range(i);
            let mut aik = block(a, ri, rk);
            for j in 0..k {
                let lij = block(&l, ri, range(j));
                let lkj = block(&l, rk, range(j));
                gemm(-1.0, &lij, Transpose::No, &lkj, Transpose::Yes, 1.0, &mut aik).unwrap();
            }
            trsm_in_place(&lkk, &mut aik, Side::Right, Transpose::Yes, Diag::NonUnit)
                .expect("positive pivots");
            for jj in 0..aik.cols() {
                for ii in 0..aik.rows() {
                    l.set(ri.0 + ii, rk.0 + jj, aik.get(ii, jj));
                }
            }
        }
        for jj in 0..lkk.cols() {
            for ii in jj..lkk.rows() {
                l.set(rk.0 + ii, rk.0 + jj, lkk.get(ii, jj));
            }
        }
    }
    Ok(l)
}

impl BlockDiagonal {
    /// Copy with each block's eigenvalues raised to at least `floor`.
    pub fn with_eigenvalue_floor(&self, floor: f64) -> BlockDiagonal {
        let mut out = self.clone();
        for (s, size) in self.blocks() {
            if size == 1 {
                out.diag[s] = self.diag[s].max(floor);
            } else {
                let (a, b, c) = (self.diag[s], self.sub[s], self.diag[s + 1]);
                let theta = 0.5 * (2.0 * b).atan2(a - c);
                let (sn, cs) = theta.sin_cos();
                let l1 = a * cs * cs + 2.0 * b * sn * cs + c * sn * sn;
                let l2 = a * sn * sn - 2.0 * b * sn * cs + c * cs * cs;
                let (l1, l2) = (l1.max(floor), l2.max(floor));
                out.diag[s] = l1 * cs * cs + l2 * sn * sn;
                out.diag[s + 1] = l1 * sn * sn + l2 * cs * cs;
                out.sub[s] = (l1 - l2) * sn * cs;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::mul_nt;

    fn spd(n: usize) -> DenseTile {
        let g = DenseTile::from_fn(n, n, |i, j| ((i * 13 + j * 7) % 11) as f64 / 11.0 - 0.5);
        let mut a = mul_nt(&g, &g);
        for i in 0..n {
            a.set(i, i, a.get(i, i) + n as f64);
        }
        a
    }

    #[test]
    fn two_by_two_example() {
        let a = DenseTile::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = dense_cholesky(&a).unwrap();
        let want = DenseTile::from_rows(&[&[2.0, 0.0], &[1.0, 2f64.sqrt()]]);
        assert!(l.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn indefinite_example_fails_at_column_one() {
        let a = DenseTile::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(dense_cholesky(&a), Err(CholeskyFailure { column: 1 }));
    }

    #[test]
    fn blocked_factor_reconstructs_across_panel_boundaries() {
        for n in [1, 63, 64, 65, 200] {
            let a = spd(n);
            let l = dense_cholesky(&a).unwrap();
            let r = mul_nt(&l, &l);
            assert!(r.max_abs_diff(&a) < 1e-10 * n as f64, "n={n}");
            for j in 0..n {
                for i in 0..j {
                    assert_eq!(l.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn failure_leaves_input_untouched() {
        let mut a = spd(100);
        a.set(80, 80, -1e4);
        let before = a.clone();
        let err = dense_cholesky(&a).unwrap_err();
        assert_eq!(err.column, 80);
        assert_eq!(a, before);
    }

    #[test]
    fn modified_cholesky_passes_spd_through() {
        let a = spd(30);
        let m = modified_cholesky(&a).unwrap();
        assert!(!m.modified);
        assert!(m.l.max_abs_diff(&dense_cholesky(&a).unwrap()) == 0.0);
    }

    #[test]
    fn modified_cholesky_of_slightly_indefinite_diagonal() {
        let a = DenseTile::from_rows(&[&[1.0, 0.0], &[0.0, -1e-8]]);
        let m = modified_cholesky(&a).unwrap();
        assert!(m.modified);
        let r = mul_nt(&m.l, &m.l);
        let delta = f64::powi(2.0, -26) * a.frobenius_norm();
        assert!(r.max_abs_diff(&a) <= 2.0 * delta);
        assert!((r.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn modified_cholesky_of_indefinite_matrix_is_positive_definite() {
        let n = 40;
        let mut a = spd(n);
        for i in 0..n {
            a.set(i, i, a.get(i, i) - 1.5 * n as f64);
        }
        let m = modified_cholesky(&a).unwrap();
        assert!(m.modified);
        let r = mul_nt(&m.l, &m.l);
        let ev = r.view().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(ev[0] > 0.0);
    }

    #[test]
    fn eigenvalue_floor_on_two_by_two_block() {
        let d = BlockDiagonal { diag: vec![1.0, -3.0], sub: vec![2.0] };
        let lifted = d.with_eigenvalue_floor(0.5);
        let m = DenseTile::from_rows(&[
            &[lifted.diag[0], lifted.sub[0]],
            &[lifted.sub[0], lifted.diag[1]],
        ]);
        let ev = m.view().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        // eigenvalues of [[1,2],[2,-3]] are -1 ± 2√2
        assert!((ev[0] - 0.5).abs() < 1e-12);
        assert!((ev[1] - (-1.0 + 8f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn tiled_reference_matches_dense_cholesky() {
        let a = spd(90);
        let l1 = dense_cholesky(&a).unwrap();
        for b in [7, 30, 90, 128] {
            let l2 = dense_tiled_cholesky_reference(&a, b).unwrap();
            assert!(l1.max_abs_diff(&l2) < 1e-10, "b={b}");
        }
    }
}
