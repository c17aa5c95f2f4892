//! Memory of a 3D covariance matrix as a function of the tile size. Small
//! tiles mean many low rank tiles; large tiles mean large dense diagonals.

use tlr_core::geometry::{covariance_problem, KernelSpec, PointKind};
use tlr_core::tlr::{build_tlr, memory_report, Compressor};

fn main() -> tlr_core::Result<()> {
    let n = 8192;
    println!("{:>5} {:>10} {:>10} {:>10} {:>8}", "b", "total MB", "dense MB", "lowrank MB", "avg rank");
    for b in [128, 256, 512, 1024, 2048] {
        let spec = covariance_problem(PointKind::Grid3D, n, b, KernelSpec::exponential(0.2), 0)?;
        let a = build_tlr(&spec, b, 1e-6, Compressor::ara(32, 1))?;
        let m = memory_report(&a);
        println!("{b:>5} {:>10.1} {:>10.1} {:>10.1} {:>8.1}", m.total_bytes as f64 / 1e6, m.dense_bytes as f64 / 1e6, m.low_rank_bytes as f64 / 1e6, a.average_rank());
    }
    Ok(())
}
