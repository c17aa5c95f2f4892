//! Symmetric indefinite factorization with Bunch-Kaufman pivoting.

use super::{DenseTile, Transpose};
use crate::error::{dim_err, Result, TlrError};

/// Growth bound of partial Bunch-Kaufman pivoting, `(1 + √17) / 8`.
const BK_ALPHA: f64 = 0.640_388_203_202_208_4;

/// Block diagonal matrix with 1×1 and 2×2 symmetric blocks.
///
/// `sub[i]` holds `D[i+1, i]`; it is nonzero exactly when `i, i+1` form a
/// 2×2 block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonal {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
}

impl BlockDiagonal {
    pub fn from_diagonal(diag: Vec<f64>) -> Self {
        let n = diag.len();
        BlockDiagonal { diag, sub: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// `(start, size)` of every block in order.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.sub[i] != 0.0 {
                out.push((i, 2));
                i += 2;
            } else {
                out.push((i, 1));
                i += 1;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseTile {
        let n = self.n();
        let mut d = DenseTile::zeros(n, n);
        for i in 0..n {
            d.set(i, i, self.diag[i]);
        }
        for (i, &s) in self.sub.iter().enumerate() {
            d.set(i + 1, i, s);
            d.set(i, i + 1, s);
        }
        d
    }

    /// `m ← m D`.
    pub fn apply_right(&self, m: &mut DenseTile) {
        assert_eq!(m.cols(), self.n());
        let rows = m.rows();
        for (s, size) in self.blocks() {
            if size == 1 {
                let d = self.diag[s];
                m.col_mut(s).iter_mut().for_each(|x| *x *= d);
            } else {
                let (a, b, c) = (self.diag[s], self.sub[s], self.diag[s + 1]);
                let data = m.data_mut();
                for i in 0..rows {
                    let x = data[s * rows + i];
                    let y = data[(s + 1) * rows + i];
                    data[s * rows + i] = a * x + b * y;
                    data[(s + 1) * rows + i] = b * x + c * y;
                }
            }
        }
    }

    /// `m ← D m`.
    pub fn apply_left(&self, m: &mut DenseTile) {
        assert_eq!(m.rows(), self.n());
        for j in 0..m.cols() {
            self.apply_vec(m.col_mut(j));
        }
    }

    /// `x ← D x`.
    pub fn apply_vec(&self, x: &mut [f64]) {
        for (s, size) in self.blocks() {
            if size == 1 {
                x[s] *= self.diag[s];
            } else {
                let (a, b, c) = (self.diag[s], self.sub[s], self.diag[s + 1]);
                let (p, q) = (x[s], x[s + 1]);
                x[s] = a * p + b * q;
                x[s + 1] = b * p + c * q;
            }
        }
    }

    /// `x ← D⁻¹ x`.
    pub fn solve_vec(&self, x: &mut [f64]) -> Result<()> {
        for (s, size) in self.blocks() {
            if size == 1 {
                let d = self.diag[s];
                if d == 0.0 {
                    return Err(TlrError::Singular { index: s });
                }
                x[s] /= d;
            } else {
                let (a, b, c) = (self.diag[s], self.sub[s], self.diag[s + 1]);
                let det = a * c - b * b;
                if det == 0.0 {
                    return Err(TlrError::Singular { index: s });
                }
                let (p, q) = (x[s], x[s + 1]);
                x[s] = (c * p - b * q) / det;
                x[s + 1] = (a * q - b * p) / det;
            }
        }
        Ok(())
    }

    /// `m ← D⁻¹ m`.
    pub fn solve_left(&self, m: &mut DenseTile) -> Result<()> {
        assert_eq!(m.rows(), self.n());
        for j in 0..m.cols() {
            self.solve_vec(m.col_mut(j))?;
        }
        Ok(())
    }

    /// Eigenvalues of all blocks.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = Vec::with_capacity(self.n());
        for (s, size) in self.blocks() {
            if size == 1 {
                ev.push(self.diag[s]);
            } else {
                let (a, b, c) = (self.diag[s], self.sub[s], self.diag[s + 1]);
                let mid = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                ev.push(mid - rad);
                ev.push(mid + rad);
            }
        }
        ev
    }
}

/// `P A Pᵀ = L D Lᵀ` with `(P A Pᵀ)[i][j] = A[perm[i]][perm[j]]`.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    /// Unit lower triangular factor.
    pub l: DenseTile,
    pub d: BlockDiagonal,
    pub perm: Vec<usize>,
}

impl LdlFactor {
    /// Rebuilds `A` from the factors.
    pub fn reconstruct(&self) -> DenseTile {
        let n = self.l.rows();
        let mut ld = self.l.clone();
        self.d.apply_right(&mut ld);
        let m = super::matmul_new(&ld, Transpose::No, &self.l, Transpose::Yes).expect("square");
        let mut a = DenseTile::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                a.set(self.perm[i], self.perm[j], m.get(i, j));
            }
        }
        a
    }
}

/// Bunch-Kaufman factorization of the symmetric `a` (lower triangle read).
pub fn dense_ldl(a: &DenseTile) -> Result<LdlFactor> {
    let n = a.rows();
    if a.cols() != n {
        return Err(dim_err(format!("ldl of {}x{}", n, a.cols())));
    }
    if !a.is_finite() {
        return Err(TlrError::Data("non-finite entry in ldl input".into()));
    }
    let mut w = a.clone();
    w.symmetrize_from_lower();
    let mut l = DenseTile::identity(n);
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n.saturating_sub(1)];
    let mut perm: Vec<usize> = (0..n).collect();

    let mut k = 0;
    while k < n {
        let akk = w.get(k, k).abs();
        let (imax, colmax) = (k + 1..n)
            .map(|i| (i, w.get(i, k).abs()))
            .fold((k, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        if akk.max(colmax) == 0.0 {
            diag[k] = 0.0;
            k += 1;
            continue;
        }
        let (kp, step) = if akk >= BK_ALPHA * colmax {
            (k, 1)
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| w.get(imax, j).abs())
                .fold(0.0, f64::max);
            if akk * rowmax >= BK_ALPHA * colmax * colmax {
                (k, 1)
            } else if w.get(imax, imax).abs() >= BK_ALPHA * rowmax {
                (imax, 1)
            } else {
                (imax, 2)
            }
        };
        let kk = k + step - 1;
        if kp != kk {
            symmetric_swap(&mut w, k, kk, kp);
            for j in 0..k {
                let (x, y) = (l.get(kk, j), l.get(kp, j));
                l.set(kk, j, y);
                l.set(kp, j, x);
            }
            perm.swap(kk, kp);
        }
        if step == 1 {
            let d = w.get(k, k);
            diag[k] = d;
            let mult: Vec<f64> = (k + 1..n).map(|i| w.get(i, k) / d).collect();
            rank_update(&mut w, k + 1, &[(k, &mult)]);
            for (t, &m) in mult.iter().enumerate() {
                l.set(k + 1 + t, k, m);
            }
        } else {
            let (a11, a21, a22) = (w.get(k, k), w.get(k + 1, k), w.get(k + 1, k + 1));
            diag[k] = a11;
            diag[k + 1] = a22;
            sub[k] = a21;
            let det = a11 * a22 - a21 * a21;
            let mut m0 = Vec::with_capacity(n - k - 2);
            let mut m1 = Vec::with_capacity(n - k - 2);
            for i in k + 2..n {
                let (p, q) = (w.get(i, k), w.get(i, k + 1));
                m0.push((a22 * p - a21 * q) / det);
                m1.push((a11 * q - a21 * p) / det);
            }
            rank_update(&mut w, k + 2, &[(k, &m0), (k + 1, &m1)]);
            for t in 0..m0.len() {
                l.set(k + 2 + t, k, m0[t]);
                l.set(k + 2 + t, k + 1, m1[t]);
            }
        }
        k += step;
    }
    Ok(LdlFactor { l, d: BlockDiagonal { diag, sub }, perm })
}

/// Swaps index `r` and `s` (`r < s`) of the trailing symmetric block from `k`.
fn symmetric_swap(w: &mut DenseTile, k: usize, r: usize, s: usize) {
    let n = w.rows();
    let data = w.data_mut();
    for j in k..n {
        data.swap(j * n + r, j * n + s);
    }
    let (lo, hi) = data.split_at_mut(s * n);
    lo[r * n + k..r * n + n].swap_with_slice(&mut hi[k..n]);
}

/// Trailing update `W[start.., start..] -= Σ W[.., c] m_cᵀ` over both triangles.
fn rank_update(w: &mut DenseTile, start: usize, terms: &[(usize, &Vec<f64>)]) {
    let n = w.rows();
    let data = w.data_mut();
    for j in start..n {
        let (head, tail) = data.split_at_mut(j * n);
        let cj = &mut tail[start..n];
        for &(c, m) in terms {
            let s = m[j - start];
            if s != 0.0 {
                let cc = &head[c * n + start..c * n + n];
                for (x, y) in cj.iter_mut().zip(cc) {
                    *x -= s * y;
                }
            }
        }
    }
}
