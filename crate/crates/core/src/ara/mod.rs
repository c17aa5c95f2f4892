//! Adaptive randomized approximation (ARA).
//!
//! [`ara_single`] compresses one operator given only its action on blocks of
//! Gaussian vectors. The batched driver in [`chol_ara_update`] runs many such
//! approximations at once over a column of Schur-updated tiles, keeping a
//! bounded working set and refilling it as tiles converge.
//!
//! Every probe's coefficients on the growing basis are kept. After
//! convergence the basis is cut back to the smallest prefix that still
//! captures every later probe below the threshold; the basis prefix depends
//! only on earlier probes, so the later ones are an unbiased check.

mod batched;

pub use batched::{chol_ara_update, sample_left, ColumnJob, ColumnResult, LeftLookingExpr, UpdateTerm};

use std::time::Duration;

use rand_chacha::ChaCha8Rng;

use crate::dense::{mul, mul_tn, orthog, thin_svd, BlockDiagonal, DenseTile};
use crate::error::{config_err, Result};
use crate::rng::{gaussian_tile, stream};
use crate::tlr::LowRankTile;

/// Multiplier turning per-probe residual norms into a 2-norm estimate.
pub const SAFETY_FACTOR: f64 = 10.0;

/// Share of the threshold given to sampling when the projected factor is
/// recompressed; the SVD truncation uses the rest.
pub const SAMPLING_SHARE: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct AraConfig {
    pub block_samples: usize,
    /// Absolute 2-norm threshold.
    pub eps: f64,
    pub max_rank: usize,
    /// Number of most recent probes that must pass the convergence test.
    pub window: usize,
    pub seed: u64,
    /// Truncate the projected factor with an SVD.
    pub recompress: bool,
}

impl AraConfig {
    pub fn new(block_samples: usize, eps: f64, max_rank: usize, seed: u64) -> Self {
        AraConfig { block_samples, eps, max_rank, window: block_samples, seed, recompress: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_samples == 0 {
            return Err(config_err("block samples must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(config_err("eps must be positive"));
        }
        if self.window == 0 {
            return Err(config_err("convergence window must be at least 1"));
        }
        Ok(())
    }

    /// Threshold used by the convergence test.
    pub fn sampling_eps(&self) -> f64 {
        if self.recompress {
            self.eps * SAMPLING_SHARE
        } else {
            self.eps
        }
    }
}

/// Buffer counts and working-set size for the batched drivers.
#[derive(Clone, Debug, PartialEq)]
pub struct AraWorkspace {
    /// `b × bs` sample accumulators shared by the tiles of a column.
    pub parallel_buffers: usize,
    /// `b × b` accumulators for dense diagonal updates.
    pub dense_update_buffers: usize,
    /// Maximum number of tiles under ARA at once.
    pub subset_capacity: usize,
}

impl AraWorkspace {
    /// `3b/2` sampling buffers, 20 dense buffers, two tiles per worker.
    pub fn for_tile_size(b: usize) -> Self {
        AraWorkspace {
            parallel_buffers: (3 * b / 2).max(1),
            dense_update_buffers: 20,
            subset_capacity: 2 * rayon::current_num_threads().max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallel_buffers == 0 || self.dense_update_buffers == 0 || self.subset_capacity == 0 {
            return Err(config_err("workspace counts must be at least 1"));
        }
        Ok(())
    }
}

/// Wall time per factorization phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    /// Products of the sampling chains.
    pub sampling: Duration,
    /// Products of the projection chains.
    pub projection: Duration,
    /// Summation of sampling buffers.
    pub reduction: Duration,
    /// Dense diagonal updates.
    pub dense: Duration,
    pub orthog: Duration,
    pub misc: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.sampling + self.projection + self.reduction + self.dense + self.orthog + self.misc
    }

    /// Time spent in matrix-product phases.
    pub fn gemm(&self) -> Duration {
        self.sampling + self.projection + self.dense
    }

    pub fn rows(&self) -> [(&'static str, Duration); 6] {
        [
            ("sampling", self.sampling),
            ("projection", self.projection),
            ("reduction", self.reduction),
            ("dense", self.dense),
            ("orthog", self.orthog),
            ("misc", self.misc),
        ]
    }
}

/// A linear operator known through products with blocks of vectors.
pub trait SamplerExpr: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `op · omega`.
    fn apply(&self, omega: &DenseTile) -> DenseTile;
    /// `opᵀ · q`.
    fn apply_transpose(&self, q: &DenseTile) -> DenseTile;

    /// Partial sums of `op · omega` over at most `buffers` accumulators.
    fn apply_partial(&self, omega: &DenseTile, _buffers: usize) -> Vec<DenseTile> {
        vec![self.apply(omega)]
    }

    /// Partial sums of `opᵀ · q` over at most `buffers` accumulators.
    fn apply_transpose_partial(&self, q: &DenseTile, _buffers: usize) -> Vec<DenseTile> {
        vec![self.apply_transpose(q)]
    }
}

impl<T: SamplerExpr + ?Sized> SamplerExpr for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply(&self, omega: &DenseTile) -> DenseTile {
        (**self).apply(omega)
    }
    fn apply_transpose(&self, q: &DenseTile) -> DenseTile {
        (**self).apply_transpose(q)
    }
    fn apply_partial(&self, omega: &DenseTile, buffers: usize) -> Vec<DenseTile> {
        (**self).apply_partial(omega, buffers)
    }
    fn apply_transpose_partial(&self, q: &DenseTile, buffers: usize) -> Vec<DenseTile> {
        (**self).apply_transpose_partial(q, buffers)
    }
}

impl SamplerExpr for DenseTile {
    fn rows(&self) -> usize {
        DenseTile::rows(self)
    }
    fn cols(&self) -> usize {
        DenseTile::cols(self)
    }
    fn apply(&self, omega: &DenseTile) -> DenseTile {
        mul(self, omega)
    }
    fn apply_transpose(&self, q: &DenseTile) -> DenseTile {
        mul_tn(self, q)
    }
}

impl SamplerExpr for LowRankTile {
    fn rows(&self) -> usize {
        LowRankTile::rows(self)
    }
    fn cols(&self) -> usize {
        LowRankTile::cols(self)
    }
    fn apply(&self, omega: &DenseTile) -> DenseTile {
        mul(&self.u, &mul_tn(&self.v, omega))
    }
    fn apply_transpose(&self, q: &DenseTile) -> DenseTile {
        mul(&self.v, &mul_tn(&self.u, q))
    }
}

/// `L D Lᵀ`-style product helper: `x ← D x` when a block diagonal is given.
pub(crate) fn apply_d(d: Option<&BlockDiagonal>, x: &mut DenseTile) {
    if let Some(d) = d {
        d.apply_left(x);
    }
}

/// Fixed-order pairwise tree sum.
pub fn reduce_buffers(mut parts: Vec<DenseTile>) -> DenseTile {
    assert!(!parts.is_empty(), "nothing to reduce");
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.axpy(1.0, &b).expect("equal buffer shapes");
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Convergence test on the panel factor of the latest block.
///
/// Passes when the largest of the last `window` column norms of `r`, times
/// [`SAFETY_FACTOR`], is at most `eps`.
pub fn convergence_test(r: &DenseTile, eps: f64, window: usize) -> bool {
    let start = r.cols().saturating_sub(window);
    let e = (start..r.cols())
        .map(|j| r.col(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    e * SAFETY_FACTOR <= eps
}

/// Output of an adaptive approximation: `op ≈ Q Bᵀ`.
#[derive(Clone, Debug)]
pub struct AraResult {
    /// Orthonormal basis, `rows × k`.
    pub q: DenseTile,
    /// Projected factor `opᵀ Q` (recompressed when configured), `cols × k`.
    pub b: DenseTile,
    pub converged: bool,
    /// Sampling rounds executed.
    pub rounds: usize,
    /// Probes drawn before trimming.
    pub samples: usize,
}

impl AraResult {
    pub fn rank(&self) -> usize {
        self.q.cols()
    }

    pub fn into_low_rank(self) -> LowRankTile {
        LowRankTile { u: self.q, v: self.b }
    }
}

/// Incremental state of one approximation.
pub(crate) struct AraState {
    rows: usize,
    cols: usize,
    threshold: f64,
    window: usize,
    block: usize,
    limit: usize,
    q: DenseTile,
    /// Coefficients of every probe on the basis, by probe.
    coeffs: Vec<Vec<f64>>,
    /// Norm of each probe after deflation against the basis of earlier blocks.
    deflated: Vec<f64>,
    rng: ChaCha8Rng,
    converged: bool,
    rounds: usize,
}

impl AraState {
    pub fn new(rows: usize, cols: usize, cfg: &AraConfig, rng: ChaCha8Rng) -> Self {
        AraState {
            rows,
            cols,
            threshold: cfg.sampling_eps(),
            window: cfg.window,
            block: cfg.block_samples,
            limit: cfg.max_rank.min(rows).min(cols),
            q: DenseTile::zeros(rows, 0),
            coeffs: Vec::new(),
            deflated: Vec::new(),
            rng,
            converged: rows == 0 || cols == 0,
            rounds: 0,
        }
    }

    pub fn done(&self) -> bool {
        self.converged || self.q.cols() >= self.limit
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Draws the next Gaussian block, sized to stay within the rank limit.
    pub fn draw(&mut self) -> DenseTile {
        let s = self.block.min(self.limit - self.q.cols());
        gaussian_tile(&mut self.rng, self.cols, s)
    }

    /// Orthogonalizes a new sample block and updates the convergence state.
    pub fn absorb(&mut self, y: &DenseTile) -> Result<()> {
        let k0 = self.q.cols();
        let o = orthog(&self.q, y, &mut self.rng)?;
        for j in 0..y.cols() {
            let mut c = o.projection.col(j).to_vec();
            c.extend_from_slice(o.r.col(j));
            self.deflated.push(o.r.col(j).iter().map(|x| x * x).sum::<f64>().sqrt());
            self.coeffs.push(c);
        }
        self.q.append_columns(&o.q)?;
        self.rounds += 1;
        let start = self.deflated.len().saturating_sub(self.window);
        let e = self.deflated[start..].iter().fold(0.0f64, |m, &x| m.max(x));
        if self.deflated.len() >= self.window.min(self.limit) && e * SAFETY_FACTOR <= self.threshold {
            self.converged = true;
        }
        if self.q.cols() == self.rows.min(self.cols) {
            // the basis spans the whole range
            self.converged = true;
        }
        debug_assert!(self.q.cols() == k0 + y.cols());
        Ok(())
    }

    /// Smallest basis prefix that captures every later probe to the threshold.
    fn trimmed_rank(&self) -> usize {
        let kk = self.coeffs.len();
        let tol = self.threshold / SAFETY_FACTOR;
        let tol2 = tol * tol;
        let mut tail = vec![0.0f64; kk];
        let mut k = kk;
        while k > 0 {
            let cand = k - 1;
            // probe `cand` and all later probes lose basis vector `cand`
            let mut ok = true;
            for i in cand..kk {
                let c = &self.coeffs[i];
                if i == cand {
                    tail[i] = c[cand..].iter().map(|x| x * x).sum();
                } else if cand < c.len() {
                    tail[i] += c[cand] * c[cand];
                }
                if tail[i] > tol2 {
                    ok = false;
                }
            }
            if !ok {
                break;
            }
            k = cand;
        }
        k
    }

    /// Trims the basis (if converged) and returns it.
    pub fn final_basis(&self) -> DenseTile {
        let mut q = self.q.clone();
        if self.converged {
            q.truncate_columns(self.trimmed_rank());
        }
        q
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn samples(&self) -> usize {
        self.coeffs.len()
    }
}

/// Optional SVD truncation of `Q Bᵀ` at `eps (1 - SAMPLING_SHARE)`.
pub(crate) fn finish(q: DenseTile, b: DenseTile, cfg: &AraConfig) -> Result<(DenseTile, DenseTile)> {
    if !cfg.recompress || q.cols() == 0 {
        return Ok((q, b));
    }
    let (w, sigma, z) = thin_svd(&b)?;
    let cut = cfg.eps * (1.0 - SAMPLING_SHARE);
    let k = sigma.iter().take_while(|&&s| s > cut).count();
    let mut w = w;
    w.truncate_columns(k);
    for (j, &s) in sigma.iter().take(k).enumerate() {
        w.col_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    let mut z = z;
    z.truncate_columns(k);
    Ok((mul(&q, &z), w))
}

/// Adaptive randomized approximation of a single operator.
pub fn ara_single(op: &dyn SamplerExpr, cfg: &AraConfig) -> Result<AraResult> {
    cfg.validate()?;
    let mut st = AraState::new(op.rows(), op.cols(), cfg, stream(cfg.seed, &[]));
    while !st.done() {
        let omega = st.draw();
        let y = op.apply(&omega);
        st.absorb(&y)?;
    }
    let q = st.final_basis();
    let b = op.apply_transpose(&q);
    let (q, b) = finish(q, b, cfg)?;
    Ok(AraResult { q, b, converged: st.converged(), rounds: st.rounds(), samples: st.samples() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{mul_nt, thin_svd};

    fn spectrum_matrix(n: usize, sigma: impl Fn(usize) -> f64, seed: u64) -> DenseTile {
        let mut r = stream(seed, &[]);
        let q1 = orthog(&DenseTile::zeros(n, 0), &gaussian_tile(&mut r, n, n), &mut r).unwrap().q;
        let q2 = orthog(&DenseTile::zeros(n, 0), &gaussian_tile(&mut r, n, n), &mut r).unwrap().q;
        let mut us = q1;
        for j in 0..n {
            let s = sigma(j);
            us.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        mul_nt(&us, &q2)
    }

    fn two_norm(a: &DenseTile) -> f64 {
        thin_svd(a).unwrap().1.first().copied().unwrap_or(0.0)
    }

    #[test]
    fn zero_operator_has_rank_zero() {
        let cfg = AraConfig::new(8, 1e-6, 64, 1);
        let r = ara_single(&DenseTile::zeros(64, 64), &cfg).unwrap();
        assert_eq!(r.rank(), 0);
        assert_eq!(r.rounds, 1);
        assert!(r.converged);
    }

    #[test]
    fn exact_rank_five_is_detected() {
        let mut g = stream(9, &[]);
        let a = mul_nt(&gaussian_tile(&mut g, 100, 5), &gaussian_tile(&mut g, 80, 5));
        for recompress in [false, true] {
            let mut cfg = AraConfig::new(16, 1e-8, 80, 3);
            cfg.recompress = recompress;
            let r = ara_single(&a, &cfg).unwrap();
            assert!((5..=16).contains(&r.rank()), "rank {}", r.rank());
            let err = a.sub(&mul_nt(&r.q, &r.b)).unwrap();
            assert!(two_norm(&err) <= 1e-8);
        }
    }

    #[test]
    fn rank_cap_reports_non_convergence() {
        let a = spectrum_matrix(64, |_| 1.0, 4);
        let mut cfg = AraConfig::new(8, 1e-6, 20, 2);
        cfg.recompress = false;
        let r = ara_single(&a, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.rank(), 20);
    }

    #[test]
    fn convergence_test_cases() {
        assert!(convergence_test(&DenseTile::zeros(10, 4), 1e-6, 4));
        let mut r = DenseTile::zeros(10, 4);
        r.set(0, 3, 1.0);
        assert!(!convergence_test(&r, 1e-6, 4));
        assert!(convergence_test(&r, 1e-6, 0));
    }

    #[test]
    fn recompression_keeps_ranks_close_to_svd() {
        let n = 200;
        let a = spectrum_matrix(n, |j| 0.8f64.powi(j as i32), 11);
        let eps = 1e-6;
        let svd_rank = thin_svd(&a).unwrap().1.iter().filter(|&&s| s > eps).count();
        let r = ara_single(&a, &AraConfig::new(16, eps, n, 5)).unwrap();
        assert!(r.rank() <= svd_rank + 2, "{} vs {svd_rank}", r.rank());
        assert!(two_norm(&a.sub(&mul_nt(&r.q, &r.b)).unwrap()) <= eps);
    }

    #[test]
    fn adjoint_of_low_rank_operator() {
        let mut g = stream(1, &[]);
        let t = LowRankTile::new(gaussian_tile(&mut g, 30, 4), gaussian_tile(&mut g, 20, 4)).unwrap();
        let x = gaussian_tile(&mut g, 20, 1);
        let y = gaussian_tile(&mut g, 30, 1);
        let lhs: f64 = t.apply(&x).data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(t.apply_transpose(&y).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}
