//! Builds a TLR covariance matrix, reports its memory and ranks, and checks
//! a matrix-vector product and a file round trip.

use tlr_core::geometry::{covariance_problem, KernelSpec, PointKind};
use tlr_core::tlr::{build_tlr, memory_report, read_tlr, tlr_matvec, write_tlr, Compressor};

fn main() -> tlr_core::Result<()> {
    let (n, b, eps) = (8192, 512, 1e-6);
    let spec = covariance_problem(PointKind::Grid2D, n, b, KernelSpec::exponential(0.1), 0)?;
    let a = build_tlr(&spec, b, eps, Compressor::ara(16, 1))?;

    let m = memory_report(&a);
    println!("n = {n}, b = {b}, nb = {}", a.nb());
    println!("memory: {:.1} MB total, {:.1} MB dense, {:.1} MB low rank (dense matrix {:.1} MB)",
        m.total_bytes as f64 / 1e6, m.dense_bytes as f64 / 1e6, m.low_rank_bytes as f64 / 1e6, (n * n * 8) as f64 / 1e6);
    println!("ranks of the first tile column:");
    for i in 1..a.nb() {
        print!(" {}", a.rank(i, 0));
    }
    println!();

    // column 100 of A through the TLR product and from the kernel directly
    let mut e = vec![0.0; n];
    e[100] = 1.0;
    let col = tlr_matvec(&a, &e)?;
    let err = (0..n).map(|i| (col[i] - spec.entry(i, 100)).abs()).fold(0.0, f64::max);
    println!("max error of A e_100: {err:.2e}");

    let path = std::env::temp_dir().join("build_tlr_example.tlrm");
    write_tlr(&a, &path)?;
    let back = read_tlr(&path)?;
    println!("round trip identical: {}", back == a);
    std::fs::remove_file(path)?;
    Ok(())
}
