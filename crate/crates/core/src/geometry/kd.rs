//! KD-tree ordering whose leaves coincide with matrix tiles.

use super::PointSet;
use crate::error::{config_err, Result};

/// Reorders `ps` so consecutive runs of `tile` rows form KD-tree leaves.
///
/// Each node sorts its points along the widest side of their bounding box
/// (ties by original index) and hands `tile · p / 2` points to the left
/// child, where `p` is the power of two closest to `⌈size / tile⌉` (rounding
/// up on ties). Every leaf except possibly the last holds exactly `tile`
/// points.
pub fn kd_order(ps: &PointSet, tile: usize) -> Result<PointSet> {
    let n = ps.len();
    if tile == 0 || tile > n {
        return Err(config_err(format!("tile size {tile} outside 1..={n}")));
    }
    let mut idx = ps.ordering().to_vec();
    split(ps, &mut idx, tile);
    ps.clone().with_ordering(idx)
}

fn closest_power_of_two(c: usize) -> usize {
    let hi = c.next_power_of_two();
    let lo = if hi == c { c } else { hi / 2 };
    if c - lo < hi - c {
        lo
    } else {
        hi
    }
}

fn split(ps: &PointSet, idx: &mut [usize], tile: usize) {
    let size = idx.len();
    if size <= tile {
        return;
    }
    let dim = ps.dim();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &p in idx.iter() {
        for (d, &x) in ps.point(p).iter().enumerate() {
            lo[d] = lo[d].min(x);
            hi[d] = hi[d].max(x);
        }
    }
    let axis = (0..dim).fold(0, |best, d| if hi[d] - lo[d] > hi[best] - lo[best] { d } else { best });
    idx.sort_by(|&a, &b| {
        ps.point(a)[axis].total_cmp(&ps.point(b)[axis]).then(a.cmp(&b))
    });
    let left = tile * closest_power_of_two(size.div_ceil(tile)) / 2;
    let (l, r) = idx.split_at_mut(left);
    split(ps, l, tile);
    split(ps, r, tile);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_points, PointKind};

    fn leaves(ps: &PointSet, tile: usize) -> Vec<Vec<usize>> {
        ps.ordering().chunks(tile).map(|c| c.to_vec()).collect()
    }

    #[test]
    fn closest_powers() {
        let got: Vec<usize> = (1..=9).map(closest_power_of_two).collect();
        assert_eq!(got, vec![1, 2, 4, 4, 4, 8, 8, 8, 8]);
    }

    #[test]
    fn single_leaf_keeps_identity() {
        let ps = generate_points(PointKind::Ball3D, 100, 7).unwrap();
        let o = kd_order(&ps, 100).unwrap();
        assert_eq!(o.ordering(), ps.ordering());
    }

    #[test]
    fn points_on_a_line_split_at_the_median() {
        let xs: Vec<f64> = (0..16).map(|i| ((i * 7) % 16) as f64 / 16.0).collect();
        let ps = PointSet::new(1, xs.clone()).unwrap();
        let o = kd_order(&ps, 8).unwrap();
        let mut sorted: Vec<usize> = (0..16).collect();
        sorted.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let mut left = o.ordering()[..8].to_vec();
        left.sort_unstable();
        let mut want = sorted[..8].to_vec();
        want.sort_unstable();
        assert_eq!(left, want);
    }

    #[test]
    fn large_grid_gives_full_leaves() {
        let ps = generate_points(PointKind::Grid3D, 1 << 15, 0).unwrap();
        let o = kd_order(&ps, 512).unwrap();
        let lv = leaves(&o, 512);
        assert_eq!(lv.len(), 64);
        assert!(lv.iter().all(|l| l.len() == 512));
    }

    #[test]
    fn leaves_are_spatially_compact() {
        let ps = generate_points(PointKind::Grid2D, 1 << 12, 0).unwrap();
        let o = kd_order(&ps, 256).unwrap();
        for leaf in leaves(&o, 256) {
            let xs: Vec<f64> = leaf.iter().map(|&p| ps.point(p)[0]).collect();
            let ys: Vec<f64> = leaf.iter().map(|&p| ps.point(p)[1]).collect();
            let w = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
            let h = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
            assert!(w < 0.26 && h < 0.26, "leaf extent {w} x {h}");
        }
    }

    #[test]
    fn oversized_tile_rejected() {
        let ps = generate_points(PointKind::Grid2D, 10, 0).unwrap();
        assert!(kd_order(&ps, 11).is_err());
        assert!(kd_order(&ps, 0).is_err());
    }
}
