//! Dense tile kernels.
//!
//! [`DenseTile`] is a column-major `f64` matrix. Matrix products are routed
//! through `faer` (sequential) on zero-copy views; the factorizations, the
//! triangular solves and the block orthogonalization are implemented here on
//! top of that product.

mod cholesky;
mod ldl;
mod orthog;
mod svd;
mod trsm;

pub use cholesky::{
    dense_cholesky, dense_tiled_cholesky_reference, modified_cholesky, CholeskyFailure,
    ModifiedCholesky,
};
pub use ldl::{dense_ldl, BlockDiagonal, LdlFactor};
pub use orthog::{orthog, Orthogonalized};
pub use svd::{svd_truncate, symmetric_truncate, thin_svd, Truncation};
pub use trsm::{dense_trsm, trsm_in_place, Diag, Side};

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};

use crate::error::{dim_err, Result, TlrError};

/// Whether an operand enters a product as stored or transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DenseTile {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseTile {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseTile { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        DenseTile { rows, cols, data }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err(format!(
                "{} values for a {rows}x{cols} tile",
                data.len()
            )));
        }
        Ok(DenseTile { rows, cols, data })
    }

    /// Builds a tile from row slices, mostly for tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n), "ragged rows");
        Self::from_fn(m, n, |i, j| rows[i][j])
    }

    /// A `rows × 1` tile holding `v`.
    pub fn column_vector(v: &[f64]) -> Self {
        DenseTile { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> DenseTile {
        DenseTile::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseTile) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(dim_err(format!(
                "axpy of {:?} into {:?}",
                other.shape(),
                self.shape()
            )));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    pub fn sub(&self, other: &DenseTile) -> Result<DenseTile> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Copy of the columns `start..end`.
    pub fn columns(&self, start: usize, end: usize) -> DenseTile {
        assert!(start <= end && end <= self.cols);
        DenseTile {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }

    /// Copy of the rows `start..end`.
    pub fn row_block(&self, start: usize, end: usize) -> DenseTile {
        assert!(start <= end && end <= self.rows);
        DenseTile::from_fn(end - start, self.cols, |i, j| self.get(start + i, j))
    }

    /// Appends the columns of `other`.
    pub fn append_columns(&mut self, other: &DenseTile) -> Result<()> {
        if self.cols == 0 && self.data.is_empty() {
            self.rows = other.rows;
        }
        if other.rows != self.rows {
            return Err(dim_err(format!(
                "appending {} rows to {} rows",
                other.rows, self.rows
            )));
        }
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
        Ok(())
    }

    /// Keeps only the first `k` columns.
    pub fn truncate_columns(&mut self, k: usize) {
        if k < self.cols {
            self.cols = k;
            self.data.truncate(k * self.rows);
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DenseTile) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Copies the lower triangle onto the upper one.
    pub fn symmetrize_from_lower(&mut self) {
        let n = self.rows;
        assert_eq!(n, self.cols);
        for j in 0..n {
            for i in j + 1..n {
                let v = self.data[j * n + i];
                self.data[i * n + j] = v;
            }
        }
    }

    /// Zeroes the strict upper triangle.
    pub fn zero_upper(&mut self) {
        let n = self.rows;
        for j in 0..self.cols {
            for i in 0..j.min(n) {
                self.data[j * n + i] = 0.0;
            }
        }
    }

    /// Matrix-vector product `self * x` (or `selfᵀ * x`) added into `y`.
    pub fn gemv_add(&self, trans: Transpose, alpha: f64, x: &[f64], y: &mut [f64]) {
        match trans {
            Transpose::No => {
                debug_assert!(x.len() == self.cols && y.len() == self.rows);
                for (j, &xj) in x.iter().enumerate() {
                    let a = alpha * xj;
                    if a != 0.0 {
                        for (yi, cij) in y.iter_mut().zip(self.col(j)) {
                            *yi += a * cij;
                        }
                    }
                }
            }
            Transpose::Yes => {
                debug_assert!(x.len() == self.rows && y.len() == self.cols);
                for (j, yj) in y.iter_mut().enumerate() {
                    let dot: f64 = self.col(j).iter().zip(x).map(|(a, b)| a * b).sum();
                    *yj += alpha * dot;
                }
            }
        }
    }

    pub(crate) fn view(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.data, self.rows, self.cols)
    }

    pub(crate) fn view_mut(&mut self) -> MatMut<'_, f64> {
        MatMut::from_column_major_slice_mut(&mut self.data, self.rows, self.cols)
    }

    pub(crate) fn from_faer(m: MatRef<'_, f64>) -> DenseTile {
        DenseTile::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

fn op(m: MatRef<'_, f64>, t: Transpose) -> MatRef<'_, f64> {
    match t {
        Transpose::No => m,
        Transpose::Yes => m.transpose(),
    }
}

/// `dst = alpha * lhs * rhs` (`accumulate == false`) or `dst += alpha * lhs * rhs`.
pub(crate) fn gemm_into(
    dst: MatMut<'_, f64>,
    accumulate: bool,
    lhs: MatRef<'_, f64>,
    rhs: MatRef<'_, f64>,
    alpha: f64,
) {
    let accum = if accumulate { Accum::Add } else { Accum::Replace };
    matmul(dst, accum, lhs, rhs, alpha, Par::Seq);
    clear_upper_simd_state();
}

/// Clears the upper halves of the vector registers after a faer kernel.
///
/// faer's wide-vector kernels return with dirty upper register state; legacy
/// SSE code running afterwards (the rest of this crate and libm) then pays a
/// large per-instruction penalty on many x86 cores.
#[inline]
pub(crate) fn clear_upper_simd_state() {
    #[cfg(target_arch = "x86_64")]
    {
        #[target_feature(enable = "avx")]
        unsafe fn zeroupper() {
            std::arch::x86_64::_mm256_zeroupper();
        }
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            unsafe { zeroupper() }
        }
    }
}

/// `C = alpha * op(A) * op(B) + beta * C`.
pub fn gemm(
    alpha: f64,
    a: &DenseTile,
    ta: Transpose,
    b: &DenseTile,
    tb: Transpose,
    beta: f64,
    c: &mut DenseTile,
) -> Result<()> {
    let av = op(a.view(), ta);
    let bv = op(b.view(), tb);
    if av.ncols() != bv.nrows() || c.rows != av.nrows() || c.cols != bv.ncols() {
        return Err(TlrError::Dimension(format!(
            "gemm {}x{} * {}x{} into {}x{}",
            av.nrows(),
            av.ncols(),
            bv.nrows(),
            bv.ncols(),
            c.rows,
            c.cols
        )));
    }
    if beta == 0.0 {
        gemm_into(c.view_mut(), false, av, bv, alpha);
    } else {
        if beta != 1.0 {
            c.scale(beta);
        }
        gemm_into(c.view_mut(), true, av, bv, alpha);
    }
    Ok(())
}

/// Returns `op(A) * op(B)`.
pub fn matmul_new(a: &DenseTile, ta: Transpose, b: &DenseTile, tb: Transpose) -> Result<DenseTile> {
    let m = if ta == Transpose::No { a.rows } else { a.cols };
    let n = if tb == Transpose::No { b.cols } else { b.rows };
    let mut c = DenseTile::zeros(m, n);
    gemm(1.0, a, ta, b, tb, 0.0, &mut c)?;
    Ok(c)
}

/// Shorthand for `A * B` with shapes already known to agree.
pub(crate) fn mul(a: &DenseTile, b: &DenseTile) -> DenseTile {
    matmul_new(a, Transpose::No, b, Transpose::No).expect("inner dimensions agree")
}

/// Shorthand for `Aᵀ * B` with shapes already known to agree.
pub(crate) fn mul_tn(a: &DenseTile, b: &DenseTile) -> DenseTile {
    matmul_new(a, Transpose::Yes, b, Transpose::No).expect("inner dimensions agree")
}

/// Shorthand for `A * Bᵀ` with shapes already known to agree.
pub(crate) fn mul_nt(a: &DenseTile, b: &DenseTile) -> DenseTile {
    matmul_new(a, Transpose::No, b, Transpose::Yes).expect("inner dimensions agree")
}

/// `y -= A * B` with shapes already known to agree.
pub(crate) fn sub_mul(y: &mut DenseTile, a: &DenseTile, b: &DenseTile) {
    gemm(-1.0, a, Transpose::No, b, Transpose::No, 1.0, y).expect("shapes agree");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &DenseTile, ta: Transpose, b: &DenseTile, tb: Transpose) -> DenseTile {
        let at = if ta == Transpose::Yes { a.transpose() } else { a.clone() };
        let bt = if tb == Transpose::Yes { b.transpose() } else { b.clone() };
        DenseTile::from_fn(at.rows(), bt.cols(), |i, j| {
            (0..at.cols()).map(|k| at.get(i, k) * bt.get(k, j)).sum()
        })
    }

    #[test]
    fn gemm_small_example() {
        let a = DenseTile::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = DenseTile::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]);
        let mut c = DenseTile::zeros(2, 2);
        gemm(1.0, &a, Transpose::No, &b, Transpose::No, 0.0, &mut c).unwrap();
        assert_eq!(c, DenseTile::from_rows(&[&[19.0, 22.0], &[43.0, 50.0]]));
    }

    #[test]
    fn gemm_all_transpose_combinations() {
        let a = DenseTile::from_fn(5, 3, |i, j| (i as f64) - 2.0 * j as f64 + 0.5);
        let b = DenseTile::from_fn(3, 4, |i, j| (i * j) as f64 - 1.0);
        let c0 = DenseTile::from_fn(5, 4, |i, j| (i + j) as f64);
        let cases = [
            (a.clone(), Transpose::No, b.clone(), Transpose::No),
            (a.transpose(), Transpose::Yes, b.clone(), Transpose::No),
            (a.clone(), Transpose::No, b.transpose(), Transpose::Yes),
            (a.transpose(), Transpose::Yes, b.transpose(), Transpose::Yes),
        ];
        for (x, tx, y, ty) in cases {
            let mut c = c0.clone();
            gemm(2.0, &x, tx, &y, ty, -0.5, &mut c).unwrap();
            let mut want = naive(&x, tx, &y, ty);
            want.scale(2.0);
            want.axpy(-0.5, &c0).unwrap();
            assert!(c.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn gemm_rejects_bad_shapes() {
        let a = DenseTile::zeros(2, 3);
        let mut c = DenseTile::zeros(2, 2);
        let err = gemm(1.0, &a, Transpose::No, &a, Transpose::No, 0.0, &mut c);
        assert!(matches!(err, Err(TlrError::Dimension(_))));
    }

    #[test]
    fn gemm_with_empty_inner_dimension_scales_c() {
        let a = DenseTile::zeros(3, 0);
        let b = DenseTile::zeros(0, 2);
        let mut c = DenseTile::from_fn(3, 2, |_, _| 1.0);
        gemm(1.0, &a, Transpose::No, &b, Transpose::No, 0.0, &mut c).unwrap();
        assert_eq!(c, DenseTile::zeros(3, 2));
    }

    #[test]
    fn append_and_truncate_columns() {
        let mut t = DenseTile::zeros(0, 0);
        t.append_columns(&DenseTile::from_fn(3, 2, |i, j| (i + 3 * j) as f64)).unwrap();
        t.append_columns(&DenseTile::from_fn(3, 1, |i, _| 10.0 + i as f64)).unwrap();
        assert_eq!(t.shape(), (3, 3));
        assert_eq!(t.col(2), &[10.0, 11.0, 12.0]);
        t.truncate_columns(1);
        assert_eq!(t.data(), &[0.0, 1.0, 2.0]);
    }
}
