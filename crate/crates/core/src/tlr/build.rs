//! Construction of a TLR matrix from a kernel problem.

use rayon::prelude::*;

use super::{packed_index, tile_sizes, LowRankTile, TlrMatrix};
use crate::ara::{ara_single, AraConfig};
use crate::dense::{svd_truncate, DenseTile};
use crate::error::{config_err, Result, TlrError};
use crate::geometry::ProblemSpec;

/// Per-tile compression method used at construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Compressor {
    /// Adaptive randomized approximation; `recompress` applies an SVD to
    /// the projected factor.
    Ara { block_samples: usize, seed: u64, recompress: bool },
    /// Truncated SVD of each tile.
    Svd,
}

impl Compressor {
    pub fn ara(block_samples: usize, seed: u64) -> Self {
        Compressor::Ara { block_samples, seed, recompress: true }
    }
}

/// Materializes every tile of `spec` and compresses the off-diagonal ones
/// to an absolute 2-norm error `eps`.
pub fn build_tlr(spec: &ProblemSpec, b: usize, eps: f64, compressor: Compressor) -> Result<TlrMatrix> {
    build_from_blocks(spec.n(), b, eps, compressor, |r0, r1, c0, c1| spec.block(r0, r1, c0, c1))
}

/// Compresses a dense symmetric matrix; only its lower block triangle is read.
pub fn compress_dense(a: &DenseTile, b: usize, eps: f64, compressor: Compressor) -> Result<TlrMatrix> {
    if a.rows() != a.cols() {
        return Err(crate::error::dim_err(format!("compressing a {}x{} matrix", a.rows(), a.cols())));
    }
    build_from_blocks(a.rows(), b, eps, compressor, |r0, r1, c0, c1| a.columns(c0, c1).row_block(r0, r1))
}

fn build_from_blocks(
    n: usize,
    b: usize,
    eps: f64,
    compressor: Compressor,
    block: impl Fn(usize, usize, usize, usize) -> DenseTile + Sync,
) -> Result<TlrMatrix> {
    if b == 0 || b > n {
        return Err(config_err(format!("tile size {b} outside 1..={n}")));
    }
    if !(eps > 0.0) {
        return Err(config_err("eps must be positive"));
    }
    if let Compressor::Ara { block_samples: 0, .. } = compressor {
        return Err(config_err("block samples must be at least 1"));
    }
    let sizes = tile_sizes(n, b);
    let offsets = super::offsets_of(&sizes);
    let nb = sizes.len();
    let range = |t: usize| (offsets[t], offsets[t] + sizes[t]);

    let diag: Vec<_> = (0..nb)
        .into_par_iter()
        .map(|t| {
            let (r0, r1) = range(t);
            let d = block(r0, r1, r0, r1);
            if d.is_finite() {
                Ok(d)
            } else {
                Err(TlrError::Data(format!("non-finite kernel entry in diagonal tile {t}")))
            }
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> =
        (0..nb).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    debug_assert!(pairs.iter().enumerate().all(|(p, &(i, j))| packed_index(i, j) == p));
    let lower: Vec<LowRankTile> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (r0, r1) = range(i);
            let (c0, c1) = range(j);
            let tile = block(r0, r1, c0, c1);
            if !tile.is_finite() {
                return Err(TlrError::Data(format!("non-finite kernel entry in tile ({i},{j})")));
            }
            match compressor {
                Compressor::Svd => {
                    let t = svd_truncate(&tile, eps)?;
                    LowRankTile::new(t.u, t.v)
                }
                Compressor::Ara { block_samples, seed, recompress } => {
                    let mut cfg = AraConfig::new(
                        block_samples,
                        eps,
                        sizes[i].min(sizes[j]),
                        crate::rng::derive_seed(seed, &[i as u64, j as u64]),
                    );
                    cfg.recompress = recompress;
                    Ok(ara_single(&tile, &cfg)?.into_low_rank())
                }
            }
        })
        .collect::<Result<_>>()?;
    TlrMatrix::from_parts(b, eps, diag, lower)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_points, kd_order, KernelSpec, PointKind};

    fn problem(n: usize, b: usize, ell: f64) -> ProblemSpec {
        let ps = kd_order(&generate_points(PointKind::Grid2D, n, 0).unwrap(), b).unwrap();
        ProblemSpec::new(ps, KernelSpec::exponential(ell)).unwrap()
    }

    #[test]
    fn nugget_dominated_kernel_has_rank_zero_tiles() {
        let ps = kd_order(&generate_points(PointKind::Grid2D, 256, 0).unwrap(), 64).unwrap();
        let spec = ProblemSpec::new(ps, KernelSpec::squared_exponential(1e-4).with_nugget(1.0)).unwrap();
        for c in [Compressor::Svd, Compressor::ara(8, 1)] {
            let a = build_tlr(&spec, 64, 1e-8, c).unwrap();
            assert_eq!(a.total_rank(), 0);
        }
    }

    #[test]
    fn tiles_meet_the_threshold() {
        let spec = problem(1024, 128, 0.1);
        let dense = spec.dense();
        for c in [Compressor::Svd, Compressor::ara(16, 5)] {
            let a = build_tlr(&spec, 128, 1e-6, c).unwrap();
            for i in 0..a.nb() {
                for j in 0..i {
                    let exact = DenseTileView::block(&dense, a.offset(i), a.offset(j), 128);
                    let err = exact.sub(&a.lower(i, j).to_dense()).unwrap();
                    let s = crate::dense::thin_svd(&err).unwrap().1[0];
                    assert!(s <= 1e-6, "({i},{j}) {c:?} err {s}");
                }
            }
        }
    }

    struct DenseTileView;
    impl DenseTileView {
        fn block(a: &crate::dense::DenseTile, r0: usize, c0: usize, b: usize) -> crate::dense::DenseTile {
            crate::dense::DenseTile::from_fn(b, b, |i, j| a.get(r0 + i, c0 + j))
        }
    }

    #[test]
    fn bad_arguments_rejected() {
        let spec = problem(64, 16, 0.1);
        assert!(build_tlr(&spec, 0, 1e-6, Compressor::Svd).is_err());
        assert!(build_tlr(&spec, 65, 1e-6, Compressor::Svd).is_err());
        assert!(build_tlr(&spec, 16, 0.0, Compressor::Svd).is_err());
    }
}
