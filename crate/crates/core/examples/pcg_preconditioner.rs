//! Low accuracy TLR Cholesky factors of A + eps I as CG preconditioners for
//! an ill-conditioned covariance matrix.

use tlr_core::ara::{AraConfig, AraWorkspace};
use tlr_core::factor::{factorize, FactorMode, FactorOptions};
use tlr_core::geometry::{covariance_problem, KernelSpec, PointKind};
use tlr_core::solve::pcg;
use tlr_core::tlr::{build_tlr, Compressor};

fn main() -> tlr_core::Result<()> {
    let (n, b) = (4096, 256);
    let kernel = KernelSpec::squared_exponential(0.1).with_nugget(1e-4);
    let spec = covariance_problem(PointKind::Grid2D, n, b, kernel, 0)?;
    let a = build_tlr(&spec, b, 1e-10, Compressor::ara(16, 1))?;
    let rhs = vec![1.0; n];

    let (_, plain) = pcg(&a, None, &rhs, 1e-6, 300)?;
    println!("no preconditioner: {} iterations, converged {}", plain.iterations, plain.converged);
    for eps in [1e-2, 1e-4, 1e-6] {
        let opts = FactorOptions { diag_shift: eps, ..FactorOptions::for_mode(FactorMode::Cholesky) };
        let f = factorize(a.clone(), FactorMode::Cholesky, &AraConfig::new(16, eps, b, 2), &AraWorkspace::for_tile_size(b), &opts)?;
        let (_, rep) = pcg(&a, Some(&f), &rhs, 1e-6, 300)?;
        println!(
            "eps {eps:.0e}: factor {:.1} MB, {} iterations, final residual {:.1e}",
            f.bytes() as f64 / 1e6,
            rep.iterations,
            rep.rel_residual_history.last().unwrap()
        );
    }
    Ok(())
}
