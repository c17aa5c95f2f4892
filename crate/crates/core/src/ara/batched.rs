//! Left-looking sampling of Schur-updated tiles and the batched column driver.

use std::time::Instant;

use rayon::prelude::*;

use super::{apply_d, finish, reduce_buffers, AraConfig, AraState, AraWorkspace, PhaseTimes, SamplerExpr};
use crate::dense::{mul, mul_tn, sub_mul, BlockDiagonal, DenseTile};
use crate::error::{config_err, Result};
use crate::rng::{derive_seed, stream};
use crate::tlr::LowRankTile;

/// One term `L(i,j) D(j) L(k,j)ᵀ` of a left-looking update.
#[derive(Clone, Copy, Debug)]
pub struct UpdateTerm<'a> {
    pub lij: &'a LowRankTile,
    pub lkj: &'a LowRankTile,
    /// Block diagonal of column `j` in LDLᵀ mode.
    pub d: Option<&'a BlockDiagonal>,
}

/// The tile expression `A(i,k) - Σ_j L(i,j) D(j) L(k,j)ᵀ`, never formed.
#[derive(Clone, Debug)]
pub struct LeftLookingExpr<'a> {
    pub a_ik: &'a LowRankTile,
    pub terms: Vec<UpdateTerm<'a>>,
}

impl LeftLookingExpr<'_> {
    fn groups(&self, buffers: usize) -> usize {
        buffers.clamp(1, self.terms.len().max(1))
    }

    fn slice(&self, g: usize, groups: usize) -> &[UpdateTerm<'_>] {
        let n = self.terms.len();
        &self.terms[g * n / groups..(g + 1) * n / groups]
    }
}

impl SamplerExpr for LeftLookingExpr<'_> {
    fn rows(&self) -> usize {
        self.a_ik.rows()
    }

    fn cols(&self) -> usize {
        self.a_ik.cols()
    }

    fn apply(&self, omega: &DenseTile) -> DenseTile {
        reduce_buffers(self.apply_partial(omega, 1))
    }

    fn apply_transpose(&self, q: &DenseTile) -> DenseTile {
        reduce_buffers(self.apply_transpose_partial(q, 1))
    }

    fn apply_partial(&self, omega: &DenseTile, buffers: usize) -> Vec<DenseTile> {
        let groups = self.groups(buffers);
        (0..groups)
            .into_par_iter()
            .map(|g| {
                let mut y = if g == 0 {
                    self.a_ik.apply(omega)
                } else {
                    DenseTile::zeros(self.rows(), omega.cols())
                };
                for t in self.slice(g, groups) {
                    if t.lij.rank() == 0 || t.lkj.rank() == 0 {
                        continue;
                    }
                    let w1 = mul_tn(&t.lkj.u, omega);
                    let mut w2 = mul(&t.lkj.v, &w1);
                    apply_d(t.d, &mut w2);
                    let w3 = mul_tn(&t.lij.v, &w2);
                    sub_mul(&mut y, &t.lij.u, &w3);
                }
                y
            })
            .collect()
    }

    fn apply_transpose_partial(&self, q: &DenseTile, buffers: usize) -> Vec<DenseTile> {
        let groups = self.groups(buffers);
        (0..groups)
            .into_par_iter()
            .map(|g| {
                let mut b = if g == 0 {
                    self.a_ik.apply_transpose(q)
                } else {
                    DenseTile::zeros(self.cols(), q.cols())
                };
                for t in self.slice(g, groups) {
                    if t.lij.rank() == 0 || t.lkj.rank() == 0 {
                        continue;
                    }
                    let w1 = mul_tn(&t.lij.u, q);
                    let mut w2 = mul(&t.lij.v, &w1);
                    apply_d(t.d, &mut w2);
                    let w3 = mul_tn(&t.lkj.v, &w2);
                    sub_mul(&mut b, &t.lkj.u, &w3);
                }
                b
            })
            .collect()
    }
}

/// A tile of the current column awaiting compression.
pub struct ColumnJob<E> {
    /// Tile row index, used for ordering ties and seeding.
    pub row: usize,
    /// Stored rank of the source tile; higher ranks are scheduled first.
    pub rank_hint: usize,
    pub expr: E,
}

/// Compressed tile `Q Bᵀ` for one job.
#[derive(Clone, Debug)]
pub struct ColumnResult {
    pub row: usize,
    pub q: DenseTile,
    pub b: DenseTile,
    pub converged: bool,
    /// Rounds the tile spent in the working set.
    pub rounds: usize,
    pub samples: usize,
}

/// Accumulators per tile: the column's share of the sampling buffers. It
/// depends only on the column length so results do not change with the
/// subset capacity.
fn buffers_per_tile(ws: &AraWorkspace, tiles: usize) -> Result<usize> {
    ws.validate()?;
    let resident = ws.subset_capacity.min(tiles);
    if ws.parallel_buffers < resident {
        return Err(config_err(format!(
            "{} sampling buffers cannot serve {resident} resident tiles",
            ws.parallel_buffers
        )));
    }
    Ok((ws.parallel_buffers / tiles.max(1)).max(1))
}

/// Samples every job's expression with its own random block.
pub fn sample_left<E: SamplerExpr + Sync>(
    jobs: &[ColumnJob<E>],
    omegas: &[DenseTile],
    ws: &AraWorkspace,
) -> Result<Vec<DenseTile>> {
    assert_eq!(jobs.len(), omegas.len());
    let pb = buffers_per_tile(ws, jobs.len())?;
    Ok(jobs
        .par_iter()
        .zip(omegas)
        .map(|(j, o)| reduce_buffers(j.expr.apply_partial(o, pb)))
        .collect())
}

/// Compresses every job of a column with a bounded, refilled working set.
///
/// Jobs enter the working set by descending `rank_hint` (ties by row). Each
/// round draws, samples, reduces and orthogonalizes one block per resident
/// tile; converged tiles are projected, leave, and are replaced from the
/// queue. Each tile's stream is the one [`super::ara_single`] would use with
/// seed `derive_seed(cfg.seed, [column, row])`.
pub fn chol_ara_update<E: SamplerExpr + Sync>(
    jobs: &[ColumnJob<E>],
    column: usize,
    cfg: &AraConfig,
    ws: &AraWorkspace,
    times: &mut PhaseTimes,
) -> Result<Vec<ColumnResult>> {
    cfg.validate()?;
    let m = jobs.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let pb = buffers_per_tile(ws, m)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| jobs[b].rank_hint.cmp(&jobs[a].rank_hint).then(jobs[a].row.cmp(&jobs[b].row)));
    let mut queue = order.into_iter();
    let new_state = |t: usize| {
        let e = &jobs[t].expr;
        let seed = derive_seed(cfg.seed, &[column as u64, jobs[t].row as u64]);
        AraState::new(e.rows(), e.cols(), cfg, stream(seed, &[]))
    };
    let mut active: Vec<(usize, AraState)> = Vec::new();
    let mut results: Vec<Option<ColumnResult>> = vec![None; m];

    loop {
        while active.len() < ws.subset_capacity {
            match queue.next() {
                Some(t) => active.push((t, new_state(t))),
                None => break,
            }
        }
        if active.is_empty() {
            break;
        }

        let t0 = Instant::now();
        let (ready, mut sampling): (Vec<_>, Vec<_>) = active.drain(..).partition(|(_, s)| s.done());
        let omegas: Vec<DenseTile> = sampling.iter_mut().map(|(_, s)| s.draw()).collect();
        times.misc += t0.elapsed();

        let t0 = Instant::now();
        let parts: Vec<Vec<DenseTile>> = sampling
            .par_iter()
            .zip(&omegas)
            .map(|((t, _), o)| jobs[*t].expr.apply_partial(o, pb))
            .collect();
        times.sampling += t0.elapsed();

        let t0 = Instant::now();
        let ys: Vec<DenseTile> = parts.into_par_iter().map(reduce_buffers).collect();
        times.reduction += t0.elapsed();

        let t0 = Instant::now();
        sampling
            .par_iter_mut()
            .zip(&ys)
            .map(|((_, s), y)| s.absorb(y))
            .collect::<Result<()>>()?;
        times.orthog += t0.elapsed();

        let (mut finished, still): (Vec<_>, Vec<_>) = sampling.into_iter().partition(|(_, s)| s.done());
        finished.extend(ready);
        active = still;

        let t0 = Instant::now();
        let bases: Vec<DenseTile> = finished.iter().map(|(_, s)| s.final_basis()).collect();
        times.misc += t0.elapsed();

        let t0 = Instant::now();
        let parts: Vec<Vec<DenseTile>> = finished
            .par_iter()
            .zip(&bases)
            .map(|((t, _), q)| jobs[*t].expr.apply_transpose_partial(q, pb))
            .collect();
        times.projection += t0.elapsed();

        let t0 = Instant::now();
        let bs: Vec<DenseTile> = parts.into_par_iter().map(reduce_buffers).collect();
        times.reduction += t0.elapsed();

        let t0 = Instant::now();
        let done: Vec<(usize, ColumnResult)> = finished
            .into_par_iter()
            .zip(bases.into_par_iter().zip(bs))
            .map(|((t, s), (q, b))| {
                let (q, b) = finish(q, b, cfg)?;
                Ok((
                    t,
                    ColumnResult {
                        row: jobs[t].row,
                        q,
                        b,
                        converged: s.converged(),
                        rounds: s.rounds(),
                        samples: s.samples(),
                    },
                ))
            })
            .collect::<Result<_>>()?;
        for (t, r) in done {
            results[t] = Some(r);
        }
        times.misc += t0.elapsed();
    }
    Ok(results.into_iter().map(|r| r.expect("every job finishes")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ara::ara_single;
    use crate::dense::{mul_nt, thin_svd};
    use crate::rng::gaussian_tile;

    fn low_rank(rows: usize, k: usize, decay: f64, seed: u64) -> LowRankTile {
        let mut g = stream(seed, &[]);
        let mut u = gaussian_tile(&mut g, rows, k);
        for j in 0..k {
            let s = decay.powi(j as i32) / (rows as f64).sqrt();
            u.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        LowRankTile::new(u, gaussian_tile(&mut g, rows, k)).unwrap()
    }

    #[test]
    fn empty_sum_samples_the_tile() {
        let a = low_rank(40, 6, 0.5, 1);
        let jobs = vec![ColumnJob { row: 1, rank_hint: 6, expr: LeftLookingExpr { a_ik: &a, terms: vec![] } }];
        let mut g = stream(2, &[]);
        let om = vec![gaussian_tile(&mut g, 40, 5)];
        let y = sample_left(&jobs, &om, &AraWorkspace::for_tile_size(40)).unwrap();
        assert_eq!(y[0], a.apply(&om[0]));
    }

    #[test]
    fn buffer_count_only_changes_rounding() {
        let a = low_rank(50, 10, 0.7, 3);
        let ls: Vec<(LowRankTile, LowRankTile)> =
            (0..9).map(|j| (low_rank(50, 4, 0.9, 10 + j), low_rank(50, 5, 0.9, 30 + j))).collect();
        let terms: Vec<UpdateTerm> = ls.iter().map(|(x, y)| UpdateTerm { lij: x, lkj: y, d: None }).collect();
        let e = LeftLookingExpr { a_ik: &a, terms };
        let mut g = stream(4, &[]);
        let om = gaussian_tile(&mut g, 50, 8);
        let y1 = reduce_buffers(e.apply_partial(&om, 1));
        let y8 = reduce_buffers(e.apply_partial(&om, 8));
        assert!(y1.max_abs_diff(&y8) <= 1e-12 * y1.max_abs());
        let mut dense = a.to_dense();
        for (x, y) in &ls {
            dense = dense.sub(&mul_nt(&x.to_dense(), &y.to_dense())).unwrap();
        }
        assert!(y1.max_abs_diff(&mul(&dense, &om)) <= 1e-12 * dense.frobenius_norm() * om.frobenius_norm());
    }

    #[test]
    fn expression_adjointness_with_block_diagonal() {
        let a = low_rank(30, 6, 0.8, 5);
        let lij = low_rank(30, 4, 0.9, 6);
        let lkj = low_rank(30, 5, 0.9, 7);
        let mut sub = vec![0.0; 29];
        sub[3] = 0.4;
        let d = BlockDiagonal { diag: (0..30).map(|i| 1.0 - i as f64 * 0.07).collect(), sub };
        let e = LeftLookingExpr { a_ik: &a, terms: vec![UpdateTerm { lij: &lij, lkj: &lkj, d: Some(&d) }] };
        let mut g = stream(8, &[]);
        let x = gaussian_tile(&mut g, 30, 1);
        let y = gaussian_tile(&mut g, 30, 1);
        let lhs: f64 = e.apply(&x).data().iter().zip(y.data()).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.data().iter().zip(e.apply_transpose(&y).data()).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn heavy_tile_stays_resident_longer() {
        let tiles: Vec<LowRankTile> =
            [64usize, 4, 4, 4].iter().enumerate().map(|(i, &k)| low_rank(128, k, 0.9, 50 + i as u64)).collect();
        let jobs: Vec<ColumnJob<&LowRankTile>> = tiles
            .iter()
            .enumerate()
            .map(|(i, t)| ColumnJob { row: i + 1, rank_hint: t.rank(), expr: t })
            .collect();
        let cfg = AraConfig::new(8, 1e-8, 128, 9);
        let ws = AraWorkspace { parallel_buffers: 8, dense_update_buffers: 1, subset_capacity: 2 };
        let mut times = PhaseTimes::default();
        let out = chol_ara_update(&jobs, 0, &cfg, &ws, &mut times).unwrap();
        assert!(out[0].rounds > 3);
        for r in &out[1..] {
            assert!(r.rounds < out[0].rounds);
        }
        for (r, t) in out.iter().zip(&tiles) {
            let err = t.to_dense().sub(&mul_nt(&r.q, &r.b)).unwrap();
            assert!(thin_svd(&err).unwrap().1[0] <= 1e-8);
        }
    }

    #[test]
    fn capacity_does_not_change_results() {
        let tiles: Vec<LowRankTile> = (0..5).map(|i| low_rank(64, 3 + 5 * i, 0.8, 70 + i as u64)).collect();
        let jobs: Vec<ColumnJob<&LowRankTile>> = tiles
            .iter()
            .enumerate()
            .map(|(i, t)| ColumnJob { row: i + 1, rank_hint: t.rank(), expr: t })
            .collect();
        let cfg = AraConfig::new(8, 1e-6, 64, 1);
        let run = |cap| {
            let ws = AraWorkspace { parallel_buffers: 16, dense_update_buffers: 1, subset_capacity: cap };
            chol_ara_update(&jobs, 3, &cfg, &ws, &mut PhaseTimes::default()).unwrap()
        };
        let base = run(1);
        for cap in [2, 5, 9] {
            for (a, b) in base.iter().zip(run(cap)) {
                assert_eq!(a.q, b.q);
                assert_eq!(a.b, b.b);
            }
        }
        // a lone tile with the same stream reproduces the batched result
        let mut single = cfg.clone();
        single.seed = crate::rng::derive_seed(cfg.seed, &[3, 2]);
        let lone = ara_single(&tiles[1], &single).unwrap();
        assert_eq!(lone.q, base[1].q);
        assert_eq!(lone.b, base[1].b);
    }

    #[test]
    fn too_few_buffers_is_config_error() {
        let t = low_rank(16, 2, 0.5, 1);
        let jobs: Vec<ColumnJob<&LowRankTile>> =
            (0..4).map(|i| ColumnJob { row: i, rank_hint: 2, expr: &t }).collect();
        let ws = AraWorkspace { parallel_buffers: 2, dense_update_buffers: 1, subset_capacity: 4 };
        let cfg = AraConfig::new(4, 1e-6, 16, 1);
        assert!(chol_ara_update(&jobs, 0, &cfg, &ws, &mut PhaseTimes::default()).is_err());
    }
}
