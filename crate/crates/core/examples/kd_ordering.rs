//! KD ordering groups nearby points into tiles, which is what keeps the
//! off-diagonal tiles of a kernel matrix low rank.

use tlr_core::geometry::{generate_points, kd_order, KernelSpec, PointKind, ProblemSpec};
use tlr_core::tlr::{build_tlr, Compressor};

fn main() -> tlr_core::Result<()> {
    let (n, b, eps) = (4096, 256, 1e-6);
    let points = generate_points(PointKind::Grid2D, n, 0)?;
    let ordered = kd_order(&points, b)?;

    // bounding box of each leaf
    for (t, leaf) in ordered.ordering().chunks(b).take(4).enumerate() {
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for &p in leaf {
            for d in 0..2 {
                lo[d] = lo[d].min(points.point(p)[d]);
                hi[d] = hi[d].max(points.point(p)[d]);
            }
        }
        println!("leaf {t}: [{:.3}, {:.3}] x [{:.3}, {:.3}]", lo[0], hi[0], lo[1], hi[1]);
    }

    let kernel = KernelSpec::exponential(0.1);
    for (name, ps) in [("lattice order", points), ("kd order", ordered)] {
        let a = build_tlr(&ProblemSpec::new(ps, kernel)?, b, eps, Compressor::Svd)?;
        println!("{name:>13}: average tile rank {:.1}, largest {}", a.average_rank(), a.rank_heatmap().iter().enumerate().flat_map(|(i, r)| r[..i].to_vec()).max().unwrap_or(0));
    }
    Ok(())
}
