//! Tile-pivoted Cholesky. Scaling the tiles by increasing weights makes the
//! pivot order reverse the natural one.

use tlr_core::ara::{AraConfig, AraWorkspace};
use tlr_core::dense::DenseTile;
use tlr_core::factor::{tlr_cholesky_pivoted, FactorMode, FactorOptions, PivotNorm};
use tlr_core::geometry::{covariance_problem, KernelSpec, PointKind};
use tlr_core::solve::{estimate_2norm_diff, DEFAULT_POWER_ITERATIONS};
use tlr_core::tlr::{compress_dense, Compressor};

fn main() -> tlr_core::Result<()> {
    let (n, b, eps) = (2048, 256, 1e-6);
    let spec = covariance_problem(PointKind::Grid2D, n, b, KernelSpec::exponential(0.1), 0)?;
    let k = spec.dense();
    // tile t scaled by 2^t, so later tiles carry more weight
    let w = |i: usize| 2f64.powi((i / b) as i32);
    let scaled = DenseTile::from_fn(n, n, |i, j| w(i) * k.get(i, j) * w(j));
    let a = compress_dense(&scaled, b, eps, Compressor::Svd)?;

    for norm in [PivotNorm::Frobenius, PivotNorm::TwoNormPower] {
        let opts = FactorOptions { pivot_norm: norm, ..FactorOptions::for_mode(FactorMode::PivotedCholesky) };
        let f = tlr_cholesky_pivoted(a.clone(), &AraConfig::new(16, eps, b, 1), &AraWorkspace::for_tile_size(b), &opts)?;
        let res = estimate_2norm_diff(&a, &f, DEFAULT_POWER_ITERATIONS, 2)?;
        println!(
            "{norm:?}: pivots {:?}, selection {:.1} ms, ||PAP^T - LL^T|| ~ {res:.2e}",
            f.perm().unwrap(),
            f.stats.pivot_selection.as_secs_f64() * 1e3
        );
    }
    Ok(())
}
