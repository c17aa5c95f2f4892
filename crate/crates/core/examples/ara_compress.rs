//! Adaptive randomized approximation of one kernel tile, compared with the
//! truncated SVD at the same absolute threshold.

use tlr_core::ara::{ara_single, AraConfig};
use tlr_core::dense::{matmul_new, svd_truncate, thin_svd, Transpose};
use tlr_core::geometry::{covariance_problem, KernelSpec, PointKind};

fn main() -> tlr_core::Result<()> {
    let b = 512;
    let spec = covariance_problem(PointKind::Grid3D, 4096, b, KernelSpec::exponential(0.2), 0)?;
    // tile (1, 0): two neighbouring leaves
    let tile = spec.block(b, 2 * b, 0, b);

    println!("{:>8} {:>9} {:>9} {:>8} {:>11}", "eps", "ara rank", "svd rank", "samples", "ara error");
    for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
        let r = ara_single(&tile, &AraConfig::new(32, eps, b, 7))?;
        let svd = svd_truncate(&tile, eps)?;
        let approx = matmul_new(&r.q, Transpose::No, &r.b, Transpose::Yes)?;
        let err = thin_svd(&tile.sub(&approx)?)?.1[0];
        println!("{eps:>8.0e} {:>9} {:>9} {:>8} {err:>11.3e}", r.rank(), svd.rank(), r.samples);
    }
    Ok(())
}
