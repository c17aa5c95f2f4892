//! Point clouds, KD ordering and covariance kernels.

mod io;
mod kd;

pub use io::{read_points, write_points};
pub use kd::kd_order;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result, TlrError};
use crate::rng;

/// Point cloud generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Grid2D,
    Grid3D,
    /// Uniform in the unit ball of R³.
    Ball3D,
}

impl PointKind {
    pub fn dim(self) -> usize {
        match self {
            PointKind::Grid2D => 2,
            PointKind::Grid3D | PointKind::Ball3D => 3,
        }
    }
}

impl FromStr for PointKind {
    type Err = TlrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grid2d" => Ok(PointKind::Grid2D),
            "grid3d" => Ok(PointKind::Grid3D),
            "ball3d" | "randomball3d" => Ok(PointKind::Ball3D),
            other => Err(config_err(format!("unsupported point kind `{other}`"))),
        }
    }
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointKind::Grid2D => "grid2d",
            PointKind::Grid3D => "grid3d",
            PointKind::Ball3D => "ball3d",
        })
    }
}

/// Points in `[0,1]^dim` (or the unit ball) plus a matrix ordering.
///
/// `ordering[i]` is the original index of the point behind matrix row `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    ordering: Vec<usize>,
}

impl PointSet {
    /// Wraps coordinates (`n·dim` values, point-major) with the identity ordering.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(config_err(format!("dimension {dim} not in 1..=3")));
        }
        if coords.len() % dim != 0 {
            return Err(TlrError::Dimension(format!(
                "{} coordinates for dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(TlrError::Data("non-finite coordinate".into()));
        }
        let n = coords.len() / dim;
        Ok(PointSet { dim, coords, ordering: (0..n).collect() })
    }

    pub fn len(&self) -> usize {
        self.ordering.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordering.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// Replaces the ordering; it must be a permutation of `0..len`.
    pub fn with_ordering(mut self, ordering: Vec<usize>) -> Result<Self> {
        if !is_permutation(&ordering, self.len()) {
            return Err(TlrError::Data("ordering is not a permutation".into()));
        }
        self.ordering = ordering;
        Ok(self)
    }

    /// Point by original index.
    pub fn point(&self, original: usize) -> &[f64] {
        &self.coords[original * self.dim..(original + 1) * self.dim]
    }

    /// Point behind matrix row `i`.
    pub fn ordered_point(&self, i: usize) -> &[f64] {
        self.point(self.ordering[i])
    }

    /// The coordinates rearranged into matrix order, with identity ordering.
    pub fn reordered(&self) -> PointSet {
        let mut coords = Vec::with_capacity(self.coords.len());
        for i in 0..self.len() {
            coords.extend_from_slice(self.ordered_point(i));
        }
        PointSet { dim: self.dim, coords, ordering: (0..self.len()).collect() }
    }
}

/// Whether `p` is a permutation of `0..n`.
pub fn is_permutation(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in p {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// Smallest `s` with `s^dim >= n`.
fn lattice_side(n: usize, dim: usize) -> usize {
    let mut s = (n as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
    while s.pow(dim as u32) < n {
        s += 1;
    }
    while s > 1 && (s - 1).pow(dim as u32) >= n {
        s -= 1;
    }
    s
}

/// Generates `n` points of the requested kind.
///
/// Grids use cell centers of a `⌈n^(1/dim)⌉`-per-side lattice enumerated with
/// the last coordinate fastest, and keep the first `n` lattice points.
pub fn generate_points(kind: PointKind, n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(config_err("point count must be at least 1"));
    }
    let dim = kind.dim();
    let mut coords = Vec::with_capacity(n * dim);
    match kind {
        PointKind::Grid2D | PointKind::Grid3D => {
            let s = lattice_side(n, dim);
            let h = 1.0 / s as f64;
            for idx in 0..n {
                let mut rem = idx;
                let mut p = [0.0; 3];
                for d in (0..dim).rev() {
                    p[d] = ((rem % s) as f64 + 0.5) * h;
                    rem /= s;
                }
                coords.extend_from_slice(&p[..dim]);
            }
        }
        PointKind::Ball3D => {
            let mut r = rng::stream(seed, &[0xba11]);
            while coords.len() < n * 3 {
                let p: [f64; 3] = [
                    r.random_range(-1.0..=1.0),
                    r.random_range(-1.0..=1.0),
                    r.random_range(-1.0..=1.0),
                ];
                if p.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                    coords.extend_from_slice(&p);
                }
            }
        }
    }
    PointSet::new(dim, coords)
}

/// Covariance kernel families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `exp(-r/ℓ)`
    Exponential,
    /// `exp(-r²/(2ℓ²))`
    SquaredExponential,
}

impl FromStr for KernelKind {
    type Err = TlrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(KernelKind::Exponential),
            "sqexp" | "se" | "squaredexponential" | "gaussian" => {
                Ok(KernelKind::SquaredExponential)
            }
            other => Err(config_err(format!("unsupported kernel `{other}`"))),
        }
    }
}

/// Isotropic covariance kernel with a diagonal nugget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub length_scale: f64,
    pub nugget: f64,
}

impl KernelSpec {
    pub fn exponential(length_scale: f64) -> Self {
        KernelSpec { kind: KernelKind::Exponential, length_scale, nugget: 0.0 }
    }

    pub fn squared_exponential(length_scale: f64) -> Self {
        KernelSpec { kind: KernelKind::SquaredExponential, length_scale, nugget: 0.0 }
    }

    pub fn with_nugget(mut self, nugget: f64) -> Self {
        self.nugget = nugget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(config_err("correlation length must be positive"));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(config_err("nugget must be nonnegative"));
        }
        Ok(())
    }

    /// Kernel value at distance `r`, without the nugget.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            KernelKind::Exponential => (-r / self.length_scale).exp(),
            KernelKind::SquaredExponential => {
                (-(r * r) / (2.0 * self.length_scale * self.length_scale)).exp()
            }
        }
    }
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Matrix entry `(i, j)` of the kernel matrix in the point set's ordering.
pub fn kernel_entry(ks: &KernelSpec, ps: &PointSet, i: usize, j: usize) -> f64 {
    let v = ks.eval(distance(ps.ordered_point(i), ps.ordered_point(j)));
    if i == j {
        v + ks.nugget
    } else {
        v
    }
}

/// A kernel matrix defined entrywise by ordered points and a kernel.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub points: PointSet,
    pub kernel: KernelSpec,
}

impl ProblemSpec {
    pub fn new(points: PointSet, kernel: KernelSpec) -> Result<Self> {
        kernel.validate()?;
        Ok(ProblemSpec { points, kernel })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        kernel_entry(&self.kernel, &self.points, i, j)
    }

    /// Dense block of rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> crate::dense::DenseTile {
        let d = self.points.dim();
        let gather = |a: usize, b: usize| -> Vec<f64> {
            (a..b).flat_map(|i| self.points.ordered_point(i).iter().copied()).collect()
        };
        let (rows, cols) = (gather(r0, r1), gather(c0, c1));
        crate::dense::DenseTile::from_fn(r1 - r0, c1 - c0, |i, j| {
            let v = self.kernel.eval(distance(&rows[i * d..(i + 1) * d], &cols[j * d..(j + 1) * d]));
            if r0 + i == c0 + j {
                v + self.kernel.nugget
            } else {
                v
            }
        })
    }

    /// The full dense matrix (for small test problems).
    pub fn dense(&self) -> crate::dense::DenseTile {
        self.block(0, self.n(), 0, self.n())
    }
}

/// Generates `n` points of `kind`, orders them for tile size `tile` and
/// attaches `kernel`.
pub fn covariance_problem(kind: PointKind, n: usize, tile: usize, kernel: KernelSpec, seed: u64) -> Result<ProblemSpec> {
    let ps = kd_order(&generate_points(kind, n, seed)?, tile)?;
    ProblemSpec::new(ps, kernel)
}

/// Generation parameters recorded next to a point file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub kind: PointKind,
    pub n: usize,
    pub seed: u64,
    pub tile: usize,
    pub kernel: KernelSpec,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_grid() {
        let ps = generate_points(PointKind::Grid2D, 4, 0).unwrap();
        let pts: Vec<&[f64]> = (0..4).map(|i| ps.point(i)).collect();
        assert_eq!(pts, vec![&[0.25, 0.25][..], &[0.25, 0.75], &[0.75, 0.25], &[0.75, 0.75]]);
        assert_eq!(ps.ordering(), &[0, 1, 2, 3]);
    }

    #[test]
    fn grid_truncation_keeps_lowest_lattice_indices() {
        let full = generate_points(PointKind::Grid3D, 27, 0).unwrap();
        let part = generate_points(PointKind::Grid3D, 20, 0).unwrap();
        assert_eq!(part.len(), 20);
        for i in 0..20 {
            assert_eq!(part.point(i), full.point(i));
        }
        assert_eq!(lattice_side(32768, 3), 32);
        assert_eq!(lattice_side(32769, 3), 33);
        assert_eq!(lattice_side(16384, 2), 128);
    }

    #[test]
    fn ball_points_are_inside_and_seeded() {
        let a = generate_points(PointKind::Ball3D, 1000, 42).unwrap();
        let b = generate_points(PointKind::Ball3D, 1000, 42).unwrap();
        assert_eq!(a, b);
        assert!((0..1000).all(|i| a.point(i).iter().map(|x| x * x).sum::<f64>() <= 1.0));
        assert_ne!(a, generate_points(PointKind::Ball3D, 1000, 43).unwrap());
    }

    #[test]
    fn unknown_kind_is_config_error() {
        assert!(matches!("grid4d".parse::<PointKind>(), Err(TlrError::Config(_))));
        assert!(generate_points(PointKind::Grid2D, 0, 0).is_err());
    }

    #[test]
    fn kernel_closed_forms() {
        let ps = PointSet::new(1, vec![0.0, 0.1]).unwrap();
        let ks = KernelSpec::exponential(0.1);
        assert_eq!(kernel_entry(&ks, &ps, 0, 0), 1.0);
        assert!((kernel_entry(&ks, &ps, 0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        let se = KernelSpec::squared_exponential(0.1).with_nugget(0.5);
        assert!((kernel_entry(&se, &ps, 1, 0) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(kernel_entry(&se, &ps, 1, 1), 1.5);
    }

    #[test]
    fn small_kernel_matrix_is_spd() {
        let ps = generate_points(PointKind::Grid2D, 8, 0).unwrap();
        let spec = ProblemSpec::new(ps, KernelSpec::exponential(0.3)).unwrap();
        let a = spec.dense();
        assert_eq!(a, a.transpose());
        let ev = a.view().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(ev[0] > 0.0);
    }

    #[test]
    fn invalid_kernels_rejected() {
        assert!(KernelSpec::exponential(0.0).validate().is_err());
        assert!(KernelSpec::exponential(1.0).with_nugget(-1.0).validate().is_err());
    }
}
