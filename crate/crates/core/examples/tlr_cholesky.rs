//! TLR Cholesky factorization of a 3D covariance matrix: residual, ranks
//! and the time spent in each phase.

use tlr_core::ara::{AraConfig, AraWorkspace};
use tlr_core::factor::{tlr_cholesky, FactorMode, FactorOptions};
use tlr_core::geometry::{covariance_problem, KernelSpec, PointKind};
use tlr_core::solve::{estimate_2norm_diff, factor_solve, DEFAULT_POWER_ITERATIONS};
use tlr_core::tlr::{build_tlr, tlr_matvec, Compressor};

fn main() -> tlr_core::Result<()> {
    let (n, b, eps) = (8192, 512, 1e-6);
    let spec = covariance_problem(PointKind::Grid3D, n, b, KernelSpec::exponential(0.2), 0)?;
    let a = build_tlr(&spec, b, eps, Compressor::ara(32, 1))?;

    let cfg = AraConfig::new(32, eps, b, 2);
    let f = tlr_cholesky(a.clone(), &cfg, &AraWorkspace::for_tile_size(b), &FactorOptions::for_mode(FactorMode::Cholesky))?;

    let res = estimate_2norm_diff(&a, &f, DEFAULT_POWER_ITERATIONS, 3)?;
    println!("||A - L L^T||_2 ~ {res:.2e} (bound 10 nb eps = {:.1e})", 10.0 * a.nb() as f64 * eps);
    println!("average rank: A {:.1}, L {:.1}", a.average_rank(), f.l().average_rank());

    let s = &f.stats;
    for (name, t) in s.phases.rows() {
        println!("{name:>10}: {:6.3} s", t.as_secs_f64());
    }
    println!("{:>10}: {:6.3} s, GEMM share {:.0}%", "total", s.total.as_secs_f64(), 100.0 * s.gemm_share());

    let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
    let x = factor_solve(&f, &tlr_matvec(&a, &x_true)?)?;
    let err = x.iter().zip(&x_true).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
        / x_true.iter().map(|q| q * q).sum::<f64>().sqrt();
    println!("direct solve relative error: {err:.2e}");
    Ok(())
}
