//! TLR LDL^T of the indefinite matrix K - sigma I and the inertia read off
//! the block diagonal factors.

use tlr_core::ara::{AraConfig, AraWorkspace};
use tlr_core::factor::{tlr_ldlt, FactorMode, FactorOptions};
use tlr_core::geometry::{covariance_problem, KernelSpec, PointKind};
use tlr_core::solve::{estimate_2norm_diff, DEFAULT_POWER_ITERATIONS};
use tlr_core::tlr::{build_tlr, Compressor};

fn main() -> tlr_core::Result<()> {
    let (n, b, eps) = (1024, 128, 1e-8);
    let spec = covariance_problem(PointKind::Grid2D, n, b, KernelSpec::exponential(0.1), 0)?;
    let sigma = 0.5;
    let mut a = build_tlr(&spec, b, eps, Compressor::ara(16, 1))?;
    a.add_to_diagonal(-sigma);

    let f = tlr_ldlt(a.clone(), &AraConfig::new(16, eps, b, 2), &AraWorkspace::for_tile_size(b), &FactorOptions::for_mode(FactorMode::Ldl))?;
    let res = estimate_2norm_diff(&a, &f, DEFAULT_POWER_ITERATIONS, 3)?;
    println!("||A - L D L^T||_2 ~ {res:.2e}");

    // Sylvester: the inertia of D is the inertia of A (up to the factorization error)
    let negative: usize = f.d_blocks().unwrap().iter().map(|blk| blk.d.eigenvalues().iter().filter(|&&l| l < 0.0).count()).sum();
    let d = spec.dense();
    let ev = faer::Mat::<f64>::from_fn(n, n, |i, j| d.get(i, j)).self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    let below = ev.iter().filter(|&&l| l < sigma).count();
    println!("negative pivots in D: {negative}; eigenvalues of K below sigma: {below}");
    Ok(())
}
