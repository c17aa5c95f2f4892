//! Left-looking TLR factorizations.
//!
//! Three drivers share one column loop:
//!
//! * [`tlr_cholesky`]: `A = L Lᵀ`;
//! * [`tlr_cholesky_pivoted`]: `P A Pᵀ = L Lᵀ` with whole tiles as pivots;
//! * [`tlr_ldlt`]: `A = L D Lᵀ` for symmetric indefinite matrices.
//!
//! At step `k` the dense diagonal update `D_k = Σ_j L(k,j) D_j L(k,j)ᵀ` is
//! expanded explicitly, the updated diagonal tile is factored, and every
//! off-diagonal tile of the column is recompressed by the batched ARA driver
//! directly from its never-formed left-looking expression. The compressed
//! tiles are then solved against the new diagonal factor and written back in
//! place of `A`.

mod compensation;
mod io;

pub use compensation::schur_compensation;
pub use io::{read_factor, write_factor};

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::ara::{
    chol_ara_update, reduce_buffers, AraConfig, AraWorkspace, ColumnJob, LeftLookingExpr, PhaseTimes,
    UpdateTerm,
};
use crate::dense::{
    dense_ldl, modified_cholesky, mul, mul_nt, mul_tn, trsm_in_place, BlockDiagonal, DenseTile, Diag,
    Side, Transpose,
};
use crate::error::{config_err, Result, TlrError};
use crate::rng::{derive_seed, gaussian_tile, stream};
use crate::tlr::{LowRankTile, TlrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorMode {
    Cholesky,
    Ldl,
    PivotedCholesky,
}

impl FactorMode {
    pub(crate) fn code(self) -> u8 {
        match self {
            FactorMode::Cholesky => 0,
            FactorMode::Ldl => 1,
            FactorMode::PivotedCholesky => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FactorMode::Cholesky),
            1 => Some(FactorMode::Ldl),
            2 => Some(FactorMode::PivotedCholesky),
            _ => None,
        }
    }
}

impl FromStr for FactorMode {
    type Err = TlrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chol" => Ok(FactorMode::Cholesky),
            "ldl" => Ok(FactorMode::Ldl),
            "pivchol" => Ok(FactorMode::PivotedCholesky),
            _ => Err(config_err(format!("unknown factorization mode '{s}'"))),
        }
    }
}

impl fmt::Display for FactorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorMode::Cholesky => "chol",
            FactorMode::Ldl => "ldl",
            FactorMode::PivotedCholesky => "pivchol",
        })
    }
}

/// Norm used to rank candidate pivot tiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotNorm {
    Frobenius,
    /// 2-norm estimated by power iteration.
    TwoNormPower,
}

impl FromStr for PivotNorm {
    type Err = TlrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frob" => Ok(PivotNorm::Frobenius),
            "power" => Ok(PivotNorm::TwoNormPower),
            _ => Err(config_err(format!("unknown pivot norm '{s}'"))),
        }
    }
}

/// Power iterations used by [`PivotNorm::TwoNormPower`].
pub const PIVOT_POWER_ITERATIONS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct FactorOptions {
    /// Add the diagonally condensed truncation error of each dense update.
    pub schur_compensation: bool,
    /// Multiple of the identity added to every updated diagonal tile.
    pub diag_shift: f64,
    pub pivot_norm: PivotNorm,
    /// Record every tile access in [`FactorStats::access_log`].
    pub trace_access: bool,
}

impl FactorOptions {
    /// Compensation on for the Cholesky variants, off for `LDLᵀ`.
    pub fn for_mode(mode: FactorMode) -> Self {
        FactorOptions {
            schur_compensation: mode != FactorMode::Ldl,
            diag_shift: 0.0,
            pivot_norm: PivotNorm::Frobenius,
            trace_access: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diag_shift >= 0.0) || !self.diag_shift.is_finite() {
            return Err(config_err(format!("diagonal shift must be nonnegative, got {}", self.diag_shift)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
}

/// What a tile holds when it is touched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Entry of the input matrix not yet factored.
    Source,
    /// Finished factor tile.
    Factor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccessEvent {
    pub step: usize,
    /// `(row, column)` with `row ≥ column`.
    pub tile: (usize, usize),
    pub access: Access,
    pub role: Role,
}

#[derive(Clone, Debug, Default)]
pub struct FactorStats {
    pub phases: PhaseTimes,
    /// Wall time of the whole factorization.
    pub total: Duration,
    /// Largest number of ARA rounds among the tiles of each column.
    pub column_rounds: Vec<usize>,
    /// Ranks of the off-diagonal factor tiles.
    pub rank_heatmap: Vec<Vec<usize>>,
    /// `Σ_k ‖D_k - D̄_k‖_F` over compensated columns.
    pub compensation: f64,
    /// Smallest pivot of each diagonal factorization: `min L(i,i)²` for the
    /// Cholesky modes, smallest eigenvalue magnitude of `D_k` for `LDLᵀ`.
    pub min_pivots: Vec<f64>,
    /// Columns whose diagonal tile needed the modified Cholesky fallback.
    pub modified_columns: Vec<usize>,
    /// Time spent choosing pivots (included in the `misc` phase).
    pub pivot_selection: Duration,
    /// Tile permutation chosen at each step, as the swapped partner index.
    pub pivot_trace: Vec<usize>,
    pub access_log: Option<Vec<AccessEvent>>,
}

impl FactorStats {
    /// Share of the wall time spent in matrix-product phases.
    pub fn gemm_share(&self) -> f64 {
        let t = self.total.as_secs_f64();
        if t > 0.0 {
            self.phases.gemm().as_secs_f64() / t
        } else {
            0.0
        }
    }

    fn log(&mut self, step: usize, tile: (usize, usize), access: Access, role: Role) {
        if let Some(log) = self.access_log.as_mut() {
            log.push(AccessEvent { step, tile, access, role });
        }
    }
}

/// Dense `LDLᵀ` data of one diagonal tile: `A_kk = P_kᵀ L_k D_k L_kᵀ P_k`,
/// with unit `L_k` in the diagonal tile of the factor.
#[derive(Clone, Debug, PartialEq)]
pub struct LdlBlock {
    pub d: BlockDiagonal,
    /// `(P_k x)[r] = x[perm[r]]`.
    pub perm: Vec<usize>,
}

impl LdlBlock {
    /// `x ← P_k x`.
    pub fn permute(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&p| x[p]).collect()
    }

    /// `x ← P_kᵀ x`.
    pub fn unpermute(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (r, &p) in self.perm.iter().enumerate() {
            y[p] = x[r];
        }
        y
    }

    fn permute_rows(&self, m: &DenseTile) -> DenseTile {
        DenseTile::from_fn(m.rows(), m.cols(), |r, c| m.get(self.perm[r], c))
    }
}

/// A finished factorization.
#[derive(Clone, Debug)]
pub struct TlrFactor {
    l: TlrMatrix,
    mode: FactorMode,
    d: Option<Vec<LdlBlock>>,
    perm: Option<Vec<usize>>,
    eps: f64,
    pub stats: FactorStats,
}

impl TlrFactor {
    /// Assembles a factor, checking that the optional parts match the mode.
    pub fn from_parts(
        l: TlrMatrix,
        mode: FactorMode,
        d: Option<Vec<LdlBlock>>,
        perm: Option<Vec<usize>>,
    ) -> Result<Self> {
        let nb = l.nb();
        if (mode == FactorMode::Ldl) != d.is_some() {
            return Err(TlrError::Format(format!("{mode} factor with D blocks present: {}", d.is_some())));
        }
        if (mode == FactorMode::PivotedCholesky) != perm.is_some() {
            return Err(TlrError::Format(format!("{mode} factor with permutation present: {}", perm.is_some())));
        }
        if let Some(d) = &d {
            if d.len() != nb {
                return Err(TlrError::Format(format!("{} D blocks for {nb} tiles", d.len())));
            }
            for (k, blk) in d.iter().enumerate() {
                let s = l.tile_rows(k);
                if blk.d.n() != s || !crate::geometry::is_permutation(&blk.perm, s) || blk.perm.len() != s {
                    return Err(TlrError::Format(format!("D block {k} does not match tile size {s}")));
                }
            }
        }
        if let Some(p) = &perm {
            if p.len() != nb || !crate::geometry::is_permutation(p, nb) {
                return Err(TlrError::Format("tile permutation is not a bijection".into()));
            }
        }
        let eps = l.eps();
        Ok(TlrFactor { l, mode, d, perm, eps, stats: FactorStats::default() })
    }

    /// Lower triangular factor; tile indices are in pivoted order.
    pub fn l(&self) -> &TlrMatrix {
        &self.l
    }

    pub fn mode(&self) -> FactorMode {
        self.mode
    }

    pub fn d_blocks(&self) -> Option<&[LdlBlock]> {
        self.d.as_deref()
    }

    /// `perm[a]` is the tile of `A` placed at position `a`.
    pub fn perm(&self) -> Option<&[usize]> {
        self.perm.as_deref()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n(&self) -> usize {
        self.l.n()
    }

    /// Bytes held by the factor tiles.
    pub fn bytes(&self) -> usize {
        crate::tlr::memory_report(&self.l).total_bytes
    }

    /// Dense block `k` of the lower factor: `L_k` for Cholesky, `P_kᵀ L_k`
    /// for `LDLᵀ`.
    pub fn diag_factor_dense(&self, k: usize) -> DenseTile {
        let t = self.l.diag(k);
        match &self.d {
            Some(d) => {
                let mut m = DenseTile::zeros(t.rows(), t.cols());
                for (r, &p) in d[k].perm.iter().enumerate() {
                    for c in 0..=r {
                        m.set(p, c, if c == r { 1.0 } else { t.get(r, c) });
                    }
                }
                m
            }
            None => {
                let mut t = t.clone();
                t.zero_upper();
                t
            }
        }
    }

    /// Dense `L` (pivoted order), with the diagonal blocks of
    /// [`Self::diag_factor_dense`].
    pub fn l_dense(&self) -> DenseTile {
        let n = self.n();
        let mut m = DenseTile::zeros(n, n);
        for k in 0..self.l.nb() {
            let ok = self.l.offset(k);
            let blk = self.diag_factor_dense(k);
            for c in 0..blk.cols() {
                for r in 0..blk.rows() {
                    m.set(ok + r, ok + c, blk.get(r, c));
                }
            }
            for i in k + 1..self.l.nb() {
                let oi = self.l.offset(i);
                let t = self.l.lower(i, k).to_dense();
                for c in 0..t.cols() {
                    for r in 0..t.rows() {
                        m.set(oi + r, ok + c, t.get(r, c));
                    }
                }
            }
        }
        m
    }

    /// Dense reconstruction `Pᵀ L D Lᵀ P` in the ordering of `A`.
    pub fn reconstruct_dense(&self) -> DenseTile {
        let l = self.l_dense();
        let mut ld = l.clone();
        if let Some(d) = &self.d {
            for (k, blk) in d.iter().enumerate() {
                let o = self.l.offset(k);
                let s = self.l.tile_rows(k);
                let mut cols = ld.columns(o, o + s).transpose();
                blk.d.apply_left(&mut cols);
                let back = cols.transpose();
                for c in 0..s {
                    ld.col_mut(o + c).copy_from_slice(back.col(c));
                }
            }
        }
        let m = mul_nt(&ld, &l);
        match &self.perm {
            None => m,
            Some(_) => {
                let map = self.row_map();
                let n = self.n();
                let mut a = DenseTile::zeros(n, n);
                for c in 0..n {
                    for r in 0..n {
                        a.set(map[r], map[c], m.get(r, c));
                    }
                }
                a
            }
        }
    }

    /// Index in `A` of each row of the pivoted order.
    pub(crate) fn row_map(&self) -> Vec<usize> {
        let n = self.n();
        let Some(p) = &self.perm else {
            return (0..n).collect();
        };
        let orig_sizes: Vec<usize> = {
            let mut s = vec![0; p.len()];
            for (a, &t) in p.iter().enumerate() {
                s[t] = self.l.tile_rows(a);
            }
            s
        };
        let orig_offsets = crate::tlr::offsets_of(&orig_sizes);
        let mut map = Vec::with_capacity(n);
        for &t in p.iter() {
            map.extend(orig_offsets[t]..orig_offsets[t] + orig_sizes[t]);
        }
        map
    }
}

/// Left-looking TLR Cholesky `A = L Lᵀ`.
pub fn tlr_cholesky(a: TlrMatrix, cfg: &AraConfig, ws: &AraWorkspace, opts: &FactorOptions) -> Result<TlrFactor> {
    factorize(a, FactorMode::Cholesky, cfg, ws, opts)
}

/// TLR Cholesky with symmetric tile pivoting: `P A Pᵀ = L Lᵀ`.
pub fn tlr_cholesky_pivoted(
    a: TlrMatrix,
    cfg: &AraConfig,
    ws: &AraWorkspace,
    opts: &FactorOptions,
) -> Result<TlrFactor> {
    factorize(a, FactorMode::PivotedCholesky, cfg, ws, opts)
}

/// Unpivoted TLR `A = L D Lᵀ` with Bunch-Kaufman diagonal tiles.
pub fn tlr_ldlt(a: TlrMatrix, cfg: &AraConfig, ws: &AraWorkspace, opts: &FactorOptions) -> Result<TlrFactor> {
    factorize(a, FactorMode::Ldl, cfg, ws, opts)
}

/// Runs the driver for `mode`, consuming `a`.
///
/// `cfg.eps` is the compression threshold; `cfg.max_rank` is clamped per
/// tile and `cfg.seed` seeds the per-tile streams of every column.
pub fn factorize(
    mut a: TlrMatrix,
    mode: FactorMode,
    cfg: &AraConfig,
    ws: &AraWorkspace,
    opts: &FactorOptions,
) -> Result<TlrFactor> {
    cfg.validate()?;
    ws.validate()?;
    opts.validate()?;
    let start = Instant::now();
    let nb = a.nb();
    let mut stats = FactorStats { access_log: opts.trace_access.then(Vec::new), ..Default::default() };
    let mut d_blocks: Vec<LdlBlock> = Vec::new();
    let mut perm: Vec<usize> = (0..nb).collect();
    let pivoted = mode == FactorMode::PivotedCholesky;
    // running diagonal updates, only kept when pivoting
    let mut running: Vec<DenseTile> = if pivoted {
        (0..nb).map(|i| DenseTile::zeros(a.tile_rows(i), a.tile_rows(i))).collect()
    } else {
        Vec::new()
    };

    for k in 0..nb {
        if pivoted {
            let t0 = Instant::now();
            let p = select_pivot(&a, &running, k, opts.pivot_norm, cfg.seed);
            a.swap_tiles(k, p);
            running.swap(k, p);
            perm.swap(k, p);
            stats.pivot_trace.push(p);
            let dt = t0.elapsed();
            stats.pivot_selection += dt;
            stats.phases.misc += dt;
        }

        // dense diagonal update
        let t0 = Instant::now();
        for j in 0..k {
            stats.log(k, (k, j), Access::Read, Role::Factor);
        }
        let dk = if pivoted {
            std::mem::replace(&mut running[k], DenseTile::zeros(0, 0))
        } else {
            let terms: Vec<(&LowRankTile, Option<&BlockDiagonal>)> =
                (0..k).map(|j| (a.lower(k, j), d_blocks.get(j).map(|b| &b.d))).collect();
            dense_update(&terms, a.tile_rows(k), ws.dense_update_buffers)
        };
        stats.phases.dense += t0.elapsed();

        let t0 = Instant::now();
        stats.log(k, (k, k), Access::Read, Role::Source);
        let mut akk = a.diag(k).clone();
        akk.symmetrize_from_lower();
        akk.axpy(-1.0, &dk)?;
        if opts.schur_compensation && k > 0 {
            let (corr, dropped) = compensation::compensate(&dk, cfg.eps)?;
            akk.axpy(1.0, &corr)?;
            stats.compensation += dropped;
        }
        drop(dk);
        if opts.diag_shift > 0.0 {
            for i in 0..akk.rows() {
                akk.set(i, i, akk.get(i, i) + opts.diag_shift);
            }
        }
        let diag_factor = factor_diagonal(&akk, mode, k, &mut stats)?;
        stats.log(k, (k, k), Access::Write, Role::Factor);
        stats.phases.misc += t0.elapsed();

        // compress the column
        let (results, rounds) = {
            // tiles whose expression is structurally zero stay empty
            let jobs: Vec<ColumnJob<LeftLookingExpr<'_>>> = (k + 1..nb)
                .filter(|&i| a.rank(i, k) > 0 || (0..k).any(|j| a.rank(i, j) > 0 && a.rank(k, j) > 0))
                .map(|i| {
                    let terms = (0..k)
                        .map(|j| UpdateTerm {
                            lij: a.lower(i, j),
                            lkj: a.lower(k, j),
                            d: d_blocks.get(j).map(|b| &b.d),
                        })
                        .collect();
                    ColumnJob { row: i, rank_hint: a.rank(i, k), expr: LeftLookingExpr { a_ik: a.lower(i, k), terms } }
                })
                .collect();
            for i in k + 1..nb {
                stats.log(k, (i, k), Access::Read, Role::Source);
                for j in 0..k {
                    stats.log(k, (i, j), Access::Read, Role::Factor);
                }
            }
            let col_cfg = AraConfig { seed: derive_seed(cfg.seed, &[0xFAC7]), ..cfg.clone() };
            let results = chol_ara_update(&jobs, k, &col_cfg, ws, &mut stats.phases)?;
            let rounds = results.iter().map(|r| r.rounds).max().unwrap_or(0);
            (results, rounds)
        };
        stats.column_rounds.push(rounds);

        // solve right factors against the diagonal factor
        let t0 = Instant::now();
        let solved: Vec<(usize, LowRankTile)> = results
            .into_par_iter()
            .map(|r| {
                let v = diag_factor.solve_right_factor(r.b, k)?;
                Ok((r.row, LowRankTile { u: r.q, v }))
            })
            .collect::<Result<_>>()?;
        stats.phases.misc += t0.elapsed();

        let (l_kk, blk) = diag_factor.into_parts();
        a.set_diag(k, l_kk);
        if let Some(blk) = blk {
            d_blocks.push(blk);
        }
        for (i, t) in solved {
            stats.log(k, (i, k), Access::Write, Role::Factor);
            a.set_lower(i, k, t);
        }

        if pivoted && k + 1 < nb {
            let t0 = Instant::now();
            let ks: Vec<usize> = (k + 1..nb).collect();
            for &i in &ks {
                stats.log(k, (i, k), Access::Read, Role::Factor);
            }
            let updates: Vec<DenseTile> = ks
                .par_iter()
                .map(|&i| dense_update(&[(a.lower(i, k), None)], a.tile_rows(i), 1))
                .collect();
            for (&i, u) in ks.iter().zip(updates) {
                running[i].axpy(1.0, &u)?;
            }
            stats.phases.dense += t0.elapsed();
        }
    }

    stats.rank_heatmap = a.rank_heatmap();
    stats.total = start.elapsed();
    let d = (mode == FactorMode::Ldl).then_some(d_blocks);
    let p = pivoted.then_some(perm);
    a.set_eps(cfg.eps);
    let mut f = TlrFactor::from_parts(a, mode, d, p)?;
    f.stats = stats;
    Ok(f)
}

/// `Σ_j L(k,j) D_j L(k,j)ᵀ`, split into at most `buffers` contiguous groups
/// summed independently and reduced in a fixed order.
fn dense_update(terms: &[(&LowRankTile, Option<&BlockDiagonal>)], size: usize, buffers: usize) -> DenseTile {
    if terms.is_empty() {
        return DenseTile::zeros(size, size);
    }
    let groups = buffers.clamp(1, terms.len());
    let n = terms.len();
    let parts: Vec<DenseTile> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let mut acc = DenseTile::zeros(size, size);
            for (t, d) in &terms[g * n / groups..(g + 1) * n / groups] {
                if t.rank() == 0 {
                    continue;
                }
                let mut dv = t.v.clone();
                if let Some(d) = d {
                    d.apply_left(&mut dv);
                }
                let core = mul_tn(&t.v, &dv);
                let w = mul(&t.u, &core);
                acc.axpy(1.0, &mul_nt(&w, &t.u)).expect("square update");
            }
            acc
        })
        .collect();
    let mut d = reduce_buffers(parts);
    let dt = d.transpose();
    d.axpy(1.0, &dt).expect("square update");
    d.scale(0.5);
    d
}

enum DiagFactor {
    Cholesky(DenseTile),
    Ldl(DenseTile, LdlBlock),
}

impl DiagFactor {
    /// Right factor of `L(i,k)` from the compressed `A(i,k) ≈ Q Bᵀ`.
    fn solve_right_factor(&self, mut b: DenseTile, k: usize) -> Result<DenseTile> {
        match self {
            DiagFactor::Cholesky(l) => {
                trsm_in_place(l, &mut b, Side::Left, Transpose::No, Diag::NonUnit)?;
                Ok(b)
            }
            DiagFactor::Ldl(l, blk) => {
                let mut pb = blk.permute_rows(&b);
                trsm_in_place(l, &mut pb, Side::Left, Transpose::No, Diag::Unit)?;
                blk.d.solve_left(&mut pb).map_err(|e| aborted(k, e))?;
                Ok(pb)
            }
        }
    }

    fn into_parts(self) -> (DenseTile, Option<LdlBlock>) {
        match self {
            DiagFactor::Cholesky(l) => (l, None),
            DiagFactor::Ldl(l, b) => (l, Some(b)),
        }
    }
}

fn aborted(column: usize, e: impl fmt::Display) -> TlrError {
    TlrError::FactorizationAborted { column, reason: e.to_string() }
}

fn factor_diagonal(akk: &DenseTile, mode: FactorMode, k: usize, stats: &mut FactorStats) -> Result<DiagFactor> {
    match mode {
        FactorMode::Cholesky | FactorMode::PivotedCholesky => {
            let m = modified_cholesky(akk).map_err(|e| aborted(k, e))?;
            if m.modified {
                stats.modified_columns.push(k);
            }
            let piv = (0..m.l.rows()).map(|i| m.l.get(i, i).powi(2)).fold(f64::INFINITY, f64::min);
            stats.min_pivots.push(piv);
            Ok(DiagFactor::Cholesky(m.l))
        }
        FactorMode::Ldl => {
            let f = dense_ldl(akk).map_err(|e| aborted(k, e))?;
            let ev = f.d.eigenvalues();
            let piv = ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
            if !(piv > 0.0) && !ev.is_empty() {
                return Err(aborted(k, "singular block in the diagonal LDL factor"));
            }
            stats.min_pivots.push(piv);
            Ok(DiagFactor::Ldl(f.l, LdlBlock { d: f.d, perm: f.perm }))
        }
    }
}

/// Index `p ≥ k` maximizing the norm of `A(p,p) - D_p`; ties go to the
/// smallest index.
fn select_pivot(a: &TlrMatrix, running: &[DenseTile], k: usize, norm: PivotNorm, seed: u64) -> usize {
    let norms: Vec<f64> = (k..a.nb())
        .into_par_iter()
        .map(|i| match norm {
            PivotNorm::Frobenius => lower_difference_frobenius(a.diag(i), &running[i]),
            PivotNorm::TwoNormPower => {
                let mut t = a.diag(i).clone();
                t.symmetrize_from_lower();
                t.axpy(-1.0, &running[i]).expect("matching tile shapes");
                symmetric_power_norm(&t, PIVOT_POWER_ITERATIONS, derive_seed(seed, &[0x9170, i as u64]))
            }
        })
        .collect();
    let mut best = 0;
    for (o, &v) in norms.iter().enumerate() {
        if v > norms[best] {
            best = o;
        }
    }
    k + best
}

/// `‖x - y‖_F` for symmetric `x`, `y` given by their lower triangles.
fn lower_difference_frobenius(x: &DenseTile, y: &DenseTile) -> f64 {
    let n = x.rows();
    let mut s = 0.0;
    for j in 0..n {
        let (cx, cy) = (x.col(j), y.col(j));
        let d = cx[j] - cy[j];
        s += d * d;
        let off: f64 = cx[j + 1..].iter().zip(&cy[j + 1..]).map(|(a, b)| (a - b) * (a - b)).sum();
        s += 2.0 * off;
    }
    s.sqrt()
}

/// 2-norm of a symmetric tile by power iteration from a seeded start.
fn symmetric_power_norm(t: &DenseTile, iters: usize, seed: u64) -> f64 {
    let n = t.rows();
    if n == 0 {
        return 0.0;
    }
    let mut g = stream(seed, &[]);
    let mut x = gaussian_tile(&mut g, n, 1).into_data();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let mut y = vec![0.0; n];
        t.gemv_add(Transpose::No, 1.0, &x, &mut y);
        lambda = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        x = y;
    }
    lambda.abs()
}
