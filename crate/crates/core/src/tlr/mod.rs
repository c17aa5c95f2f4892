//! Tile low rank matrices.
//!
//! A [`TlrMatrix`] stores dense diagonal tiles and the strictly lower block
//! triangle as [`LowRankTile`] factor pairs `U Vᵀ`. The same container holds
//! the factor produced by the `factor` module.

mod build;
pub(crate) mod io;
mod matvec;
mod memory;

pub use build::{build_tlr, compress_dense, Compressor};
pub use io::{read_tlr, write_tlr};
pub use matvec::{tlr_matvec, tlr_matvec_with_buffers, DEFAULT_MATVEC_BUFFERS};
pub use memory::{memory_report, MemoryReport};

use crate::dense::{mul_nt, DenseTile};
use crate::error::{dim_err, Result};

/// `U Vᵀ` with `U` of size `rows × k` and `V` of size `cols × k`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LowRankTile {
    pub u: DenseTile,
    pub v: DenseTile,
}

impl LowRankTile {
    pub fn new(u: DenseTile, v: DenseTile) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(dim_err(format!("factor ranks {} and {}", u.cols(), v.cols())));
        }
        Ok(LowRankTile { u, v })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        LowRankTile { u: DenseTile::zeros(rows, 0), v: DenseTile::zeros(cols, 0) }
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    pub fn to_dense(&self) -> DenseTile {
        mul_nt(&self.u, &self.v)
    }

    /// `V Uᵀ`, by exchanging the factors.
    pub fn transposed(self) -> LowRankTile {
        LowRankTile { u: self.v, v: self.u }
    }

    pub fn bytes(&self) -> usize {
        (self.rows() + self.cols()) * self.rank() * 8
    }
}

#[inline]
pub(crate) fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

/// Symmetric TLR matrix with lower block triangle storage.
#[derive(Clone, Debug, PartialEq)]
pub struct TlrMatrix {
    n: usize,
    b: usize,
    eps: f64,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    diag: Vec<DenseTile>,
    lower: Vec<LowRankTile>,
}

impl TlrMatrix {
    /// Assembles a matrix from its tiles. `lower` is indexed by
    /// `i(i-1)/2 + j` for `i > j`.
    pub fn from_parts(
        b: usize,
        eps: f64,
        diag: Vec<DenseTile>,
        lower: Vec<LowRankTile>,
    ) -> Result<Self> {
        let nb = diag.len();
        if lower.len() != nb * nb.saturating_sub(1) / 2 {
            return Err(dim_err(format!("{} lower tiles for {nb} tile rows", lower.len())));
        }
        let sizes: Vec<usize> = diag.iter().map(|d| d.rows()).collect();
        for (i, d) in diag.iter().enumerate() {
            if d.cols() != d.rows() {
                return Err(dim_err(format!("diagonal tile {i} is {}x{}", d.rows(), d.cols())));
            }
        }
        for i in 0..nb {
            for j in 0..i {
                let t = &lower[packed_index(i, j)];
                if t.rows() != sizes[i] || t.cols() != sizes[j] {
                    return Err(dim_err(format!(
                        "tile ({i},{j}) is {}x{}, expected {}x{}",
                        t.rows(),
                        t.cols(),
                        sizes[i],
                        sizes[j]
                    )));
                }
            }
        }
        let offsets = offsets_of(&sizes);
        let n = sizes.iter().sum();
        Ok(TlrMatrix { n, b, eps, sizes, offsets, diag, lower })
    }

    /// Block diagonal matrix with the given dense tiles.
    pub fn block_diagonal(b: usize, eps: f64, diag: Vec<DenseTile>) -> Result<Self> {
        let sizes: Vec<usize> = diag.iter().map(|d| d.rows()).collect();
        let mut lower = Vec::new();
        for i in 0..sizes.len() {
            for j in 0..i {
                lower.push(LowRankTile::zero(sizes[i], sizes[j]));
            }
        }
        Self::from_parts(b, eps, diag, lower)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Nominal tile size.
    #[inline]
    pub fn tile_size(&self) -> usize {
        self.b
    }

    #[inline]
    pub fn nb(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub(crate) fn set_eps(&mut self, eps: f64) {
        self.eps = eps;
    }

    /// Row count of tile row `i`.
    #[inline]
    pub fn tile_rows(&self, i: usize) -> usize {
        self.sizes[i]
    }

    /// First matrix row of tile row `i`.
    #[inline]
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn diag(&self, i: usize) -> &DenseTile {
        &self.diag[i]
    }

    pub fn diag_mut(&mut self, i: usize) -> &mut DenseTile {
        &mut self.diag[i]
    }

    pub(crate) fn set_diag(&mut self, i: usize, t: DenseTile) {
        debug_assert_eq!(t.shape(), (self.sizes[i], self.sizes[i]));
        self.diag[i] = t;
    }

    /// Stored tile `(i, j)` with `i > j`.
    #[inline]
    pub fn lower(&self, i: usize, j: usize) -> &LowRankTile {
        &self.lower[packed_index(i, j)]
    }

    pub(crate) fn set_lower(&mut self, i: usize, j: usize, t: LowRankTile) {
        debug_assert_eq!((t.rows(), t.cols()), (self.sizes[i], self.sizes[j]));
        self.lower[packed_index(i, j)] = t;
    }

    /// Rank of tile `(i, j)`, `i != j`.
    pub fn rank(&self, i: usize, j: usize) -> usize {
        if i > j {
            self.lower(i, j).rank()
        } else {
            self.lower(j, i).rank()
        }
    }

    /// Dense expansion of tile `(i, j)` of the symmetric matrix.
    pub fn tile_dense(&self, i: usize, j: usize) -> DenseTile {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => self.diag[i].clone(),
            Ordering::Greater => self.lower(i, j).to_dense(),
            Ordering::Less => self.lower(j, i).to_dense().transpose(),
        }
    }

    /// Dense expansion of the whole symmetric matrix.
    pub fn to_dense(&self) -> DenseTile {
        let mut a = DenseTile::zeros(self.n, self.n);
        for i in 0..self.nb() {
            for j in 0..self.nb() {
                let t = self.tile_dense(i, j);
                let (r0, c0) = (self.offsets[i], self.offsets[j]);
                for c in 0..t.cols() {
                    for r in 0..t.rows() {
                        a.set(r0 + r, c0 + c, t.get(r, c));
                    }
                }
            }
        }
        a
    }

    /// Dense expansion of the lower block triangle (the factor view).
    pub fn lower_to_dense(&self) -> DenseTile {
        let mut a = DenseTile::zeros(self.n, self.n);
        for i in 0..self.nb() {
            for j in 0..=i {
                let t = self.tile_dense(i, j);
                let (r0, c0) = (self.offsets[i], self.offsets[j]);
                for c in 0..t.cols() {
                    for r in 0..t.rows() {
                        if i != j || r >= c {
                            a.set(r0 + r, c0 + c, t.get(r, c));
                        }
                    }
                }
            }
        }
        a
    }

    /// Adds `s` to every diagonal entry.
    pub fn add_to_diagonal(&mut self, s: f64) {
        for d in &mut self.diag {
            for i in 0..d.rows() {
                d.set(i, i, d.get(i, i) + s);
            }
        }
    }

    /// `nb × nb` rank map with the tile size on the diagonal.
    pub fn rank_heatmap(&self) -> Vec<Vec<usize>> {
        let nb = self.nb();
        (0..nb)
            .map(|i| {
                (0..nb)
                    .map(|j| if i == j { self.sizes[i] } else { self.rank(i, j) })
                    .collect()
            })
            .collect()
    }

    /// Sum of off-diagonal ranks over the stored triangle.
    pub fn total_rank(&self) -> usize {
        self.lower.iter().map(|t| t.rank()).sum()
    }

    /// Average rank of the stored off-diagonal tiles.
    pub fn average_rank(&self) -> f64 {
        if self.lower.is_empty() {
            0.0
        } else {
            self.total_rank() as f64 / self.lower.len() as f64
        }
    }

    /// Symmetric exchange of tile indices `k` and `p` by moving handles.
    ///
    /// Tiles whose block position crosses the diagonal are transposed by
    /// swapping their factors.
    pub fn swap_tiles(&mut self, k: usize, p: usize) {
        if k == p {
            return;
        }
        let nb = self.nb();
        let sigma = |x: usize| if x == k { p } else if x == p { k } else { x };
        let mut old: Vec<Option<LowRankTile>> =
            std::mem::take(&mut self.lower).into_iter().map(Some).collect();
        let mut lower = Vec::with_capacity(old.len());
        for a in 0..nb {
            for b in 0..a {
                let (x, y) = (sigma(a), sigma(b));
                let t = if x > y {
                    old[packed_index(x, y)].take().expect("each tile moved once")
                } else {
                    old[packed_index(y, x)].take().expect("each tile moved once").transposed()
                };
                lower.push(t);
            }
        }
        self.lower = lower;
        self.diag.swap(k, p);
        self.sizes.swap(k, p);
        self.offsets = offsets_of(&self.sizes);
    }

    /// Splits `x` into per-tile slices.
    pub(crate) fn blocks<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        self.offsets.iter().zip(&self.sizes).map(|(&o, &s)| &x[o..o + s]).collect()
    }
}

pub(crate) fn offsets_of(sizes: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    sizes
        .iter()
        .map(|s| {
            let o = acc;
            acc += s;
            o
        })
        .collect()
}

/// Tile sizes for `n` rows split into tiles of `b` with a short last tile.
pub fn tile_sizes(n: usize, b: usize) -> Vec<usize> {
    let nb = n.div_ceil(b);
    (0..nb).map(|i| if i + 1 < nb { b } else { n - b * (nb - 1) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(nb: usize, b: usize) -> TlrMatrix {
        let sizes = tile_sizes(nb * b - 1, b);
        let diag = sizes
            .iter()
            .enumerate()
            .map(|(t, &s)| {
                let mut d = DenseTile::from_fn(s, s, |i, j| 1.0 / (1.0 + (i + j + t) as f64));
                d.symmetrize_from_lower();
                d
            })
            .collect();
        let mut lower = Vec::new();
        for i in 0..nb {
            for j in 0..i {
                let k = (i + j) % 3;
                let u = DenseTile::from_fn(sizes[i], k, |r, c| (r + c + i) as f64 * 0.01);
                let v = DenseTile::from_fn(sizes[j], k, |r, c| (r * c + j) as f64 * 0.02);
                lower.push(LowRankTile::new(u, v).unwrap());
            }
        }
        TlrMatrix::from_parts(b, 1e-8, diag, lower).unwrap()
    }

    #[test]
    fn tile_dense_cases() {
        let a = sample(3, 4);
        assert_eq!(a.tile_dense(1, 1), *a.diag(1));
        assert_eq!(a.tile_dense(2, 1), a.lower(2, 1).to_dense());
        assert_eq!(a.tile_dense(1, 2), a.lower(2, 1).to_dense().transpose());
        assert_eq!(a.tile_dense(1, 0), DenseTile::zeros(4, 4));
        assert_eq!(a.to_dense(), a.to_dense().transpose());
    }

    #[test]
    fn short_last_tile() {
        assert_eq!(tile_sizes(10, 4), vec![4, 4, 2]);
        assert_eq!(tile_sizes(8, 4), vec![4, 4]);
        let a = sample(3, 4);
        assert_eq!(a.n(), 11);
        assert_eq!(a.sizes(), &[4, 4, 3]);
        assert_eq!(a.offset(2), 8);
    }

    #[test]
    fn swap_tiles_is_a_symmetric_permutation() {
        let a = sample(4, 3);
        let dense = a.to_dense();
        let mut b = a.clone();
        b.swap_tiles(0, 3);
        let mut perm = Vec::new();
        for t in [3, 1, 2, 0] {
            perm.extend(a.offset(t)..a.offset(t) + a.tile_rows(t));
        }
        let want = DenseTile::from_fn(a.n(), a.n(), |i, j| dense.get(perm[i], perm[j]));
        assert_eq!(b.to_dense(), want);
        b.swap_tiles(3, 0);
        assert_eq!(b, a);
    }
}
