//! The `tlr` command line driver.
//!
//! Every subcommand writes into `--out DIR`. CSV files keep numeric result
//! columns apart from timings: timing columns are named `time_*` and the
//! files `phases.csv` and `solve_times.csv` hold nothing else, so reruns
//! with the same seed can be diffed on everything but those.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ara::{AraConfig, AraWorkspace};
use crate::error::{config_err, Result, TlrError};
use crate::factor::{self, FactorMode, FactorOptions, PivotNorm, TlrFactor};
use crate::geometry::{self, KernelKind, KernelSpec, PointKind, ProblemMeta, ProblemSpec};
use crate::solve::{self, CgReport};
use crate::tlr::{self, Compressor, TlrMatrix};

pub const POINTS_FILE: &str = "points.tlrp";
pub const PROBLEM_FILE: &str = "problem.json";
pub const MATRIX_FILE: &str = "matrix.tlrm";
pub const FACTOR_FILE: &str = "factor.tlrf";

#[derive(Parser, Debug)]
#[command(name = "tlr", version, about = "Tile low rank factorizations of kernel matrices")]
pub struct Cli {
    /// Seed for point generation and randomized sampling.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate and order a point set; writes points.tlrp and problem.json.
    Generate(GenerateArgs),
    /// Build a TLR matrix; writes matrix.tlrm, memory.csv and ranks.csv.
    Build(BuildArgs),
    /// Factor a TLR matrix; writes factor.tlrf, phases.csv, columns.csv,
    /// residual.txt and, when pivoting, pivots.csv.
    Factor(FactorArgs),
    /// Run preconditioned CG; writes cg.csv, cg.json, solve_times.csv and
    /// solution.csv.
    Solve(SolveArgs),
    /// Build and factor over a grid of tile sizes and thresholds; writes
    /// bench.csv.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: PointKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_kernel, default_value = "exp")]
    pub kernel: KernelKind,
    /// Correlation length.
    #[arg(long, default_value_t = 0.1)]
    pub ell: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nugget: f64,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Tile size the ordering targets.
    #[arg(long)]
    pub tile: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompressorKind {
    Ara,
    Svd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Switch {
    On,
    Off,
}

#[derive(Args, Debug, Clone)]
pub struct AraArgs {
    /// ARA block samples.
    #[arg(long, default_value_t = 32)]
    pub bs: usize,
    /// Parallel sampling buffers per column (default 3b/2).
    #[arg(long)]
    pub buffers: Option<usize>,
    /// Dense diagonal update buffers.
    #[arg(long, default_value_t = 20)]
    pub dense_buffers: usize,
    /// Tiles under ARA at once (default twice the thread count).
    #[arg(long)]
    pub subset: Option<usize>,
}

impl AraArgs {
    fn workspace(&self, b: usize) -> AraWorkspace {
        let mut ws = AraWorkspace::for_tile_size(b);
        if let Some(p) = self.buffers {
            ws.parallel_buffers = p;
        }
        ws.dense_update_buffers = self.dense_buffers;
        if let Some(s) = self.subset {
            ws.subset_capacity = s;
        }
        ws
    }
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Directory holding points.tlrp and problem.json (defaults to --out).
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long)]
    pub eps: f64,
    /// Tile size (defaults to the one stored with the problem).
    #[arg(long)]
    pub tile: Option<usize>,
    #[arg(long, value_enum, default_value = "ara")]
    pub compressor: CompressorKind,
    #[arg(long, default_value_t = 32)]
    pub bs: usize,
}

#[derive(Args, Debug, Clone)]
pub struct FactorFlags {
    #[arg(long, value_parser = parse_mode, default_value = "chol")]
    pub mode: FactorMode,
    #[arg(long, value_parser = parse_pivot_norm, default_value = "frob")]
    pub pivot_norm: PivotNorm,
    /// Schur compensation (default on for chol/pivchol, off for ldl).
    #[arg(long, value_enum)]
    pub compensation: Option<Switch>,
    #[arg(long, default_value_t = 0.0)]
    pub diag_shift: f64,
    #[command(flatten)]
    pub ara: AraArgs,
}

impl FactorFlags {
    fn options(&self) -> FactorOptions {
        let mut o = FactorOptions::for_mode(self.mode);
        if let Some(c) = self.compensation {
            o.schur_compensation = c == Switch::On;
        }
        o.diag_shift = self.diag_shift;
        o.pivot_norm = self.pivot_norm;
        o
    }
}

#[derive(Args, Debug)]
pub struct FactorArgs {
    /// TLR matrix file (defaults to OUT/matrix.tlrm).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Compression threshold (defaults to the matrix threshold).
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub flags: FactorFlags,
    /// Power iterations for the residual estimate; 0 skips it.
    #[arg(long, default_value_t = solve::DEFAULT_POWER_ITERATIONS)]
    pub power_iters: usize,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// TLR matrix file (defaults to OUT/matrix.tlrm).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Preconditioner factor file.
    #[arg(long, conflicts_with = "precond_eps")]
    pub factor: Option<PathBuf>,
    /// Build the preconditioner in process by factoring `A + eps I` at
    /// this threshold.
    #[arg(long)]
    pub precond_eps: Option<f64>,
    /// `ones` or `random:SEED`.
    #[arg(long, default_value = "ones")]
    pub rhs: String,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[command(flatten)]
    pub ara: AraArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Tile sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub tile: Vec<usize>,
    /// Thresholds, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    #[arg(long, value_enum, default_value = "ara")]
    pub compressor: CompressorKind,
    #[command(flatten)]
    pub flags: FactorFlags,
    /// Skip the factorization and only record build memory.
    #[arg(long)]
    pub build_only: bool,
    #[arg(long, default_value_t = solve::DEFAULT_POWER_ITERATIONS)]
    pub power_iters: usize,
}

fn parse_kind(s: &str) -> std::result::Result<PointKind, String> {
    s.parse().map_err(|e: TlrError| e.to_string())
}

fn parse_kernel(s: &str) -> std::result::Result<KernelKind, String> {
    s.parse().map_err(|e: TlrError| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<FactorMode, String> {
    s.parse().map_err(|e: TlrError| e.to_string())
}

fn parse_pivot_norm(s: &str) -> std::result::Result<PivotNorm, String> {
    s.parse().map_err(|e: TlrError| e.to_string())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a pool of `--threads` workers.
pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(TlrError::Usage("--threads must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| config_err(e.to_string()))?;
    fs::create_dir_all(&cli.out)?;
    let (seed, out) = (cli.seed, cli.out.clone());
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(a, seed, &out),
        Command::Build(a) => cmd_build(a, seed, &out),
        Command::Factor(a) => cmd_factor(a, seed, &out),
        Command::Solve(a) => cmd_solve(a, seed, &out),
        Command::Bench(a) => cmd_bench(a, seed, &out),
    })
}

fn usage(msg: impl Into<String>) -> TlrError {
    TlrError::Usage(msg.into())
}

fn check_eps(eps: f64, flag: &str) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(usage(format!("{flag} must be a positive number, got {eps}")));
    }
    Ok(())
}

fn check_exists(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(TlrError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }
    Ok(())
}

fn kernel_of(p: &ProblemArgs) -> Result<KernelSpec> {
    let k = KernelSpec { kind: p.kernel, length_scale: p.ell, nugget: p.nugget };
    k.validate().map_err(|e| usage(e.to_string()))?;
    if p.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    Ok(k)
}

pub fn cmd_generate(a: &GenerateArgs, seed: u64, out: &Path) -> Result<()> {
    let kernel = kernel_of(&a.problem)?;
    if a.tile == 0 || a.tile > a.problem.n {
        return Err(usage(format!("--tile must lie in 1..={}", a.problem.n)));
    }
    let ps = geometry::kd_order(&geometry::generate_points(a.problem.kind, a.problem.n, seed)?, a.tile)?;
    geometry::write_points(&ps, out.join(POINTS_FILE))?;
    let meta = ProblemMeta { kind: a.problem.kind, n: a.problem.n, seed, tile: a.tile, kernel };
    fs::write(out.join(PROBLEM_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Loads the problem written by `generate` from `dir`.
pub fn load_problem(dir: &Path) -> Result<(ProblemSpec, ProblemMeta)> {
    let meta_path = dir.join(PROBLEM_FILE);
    let points_path = dir.join(POINTS_FILE);
    check_exists(&meta_path)?;
    check_exists(&points_path)?;
    let meta: ProblemMeta =
        serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| TlrError::Format(e.to_string()))?;
    let ps = geometry::read_points(&points_path)?;
    if ps.len() != meta.n {
        return Err(TlrError::Format(format!("{} points but problem.json says {}", ps.len(), meta.n)));
    }
    Ok((ProblemSpec::new(ps, meta.kernel.clone())?, meta))
}

fn compressor(kind: CompressorKind, bs: usize, seed: u64) -> Compressor {
    match kind {
        CompressorKind::Ara => Compressor::ara(bs, seed),
        CompressorKind::Svd => Compressor::Svd,
    }
}

pub fn cmd_build(a: &BuildArgs, seed: u64, out: &Path) -> Result<()> {
    check_eps(a.eps, "--eps")?;
    if a.bs == 0 {
        return Err(usage("--bs must be at least 1"));
    }
    let dir = a.problem.clone().unwrap_or_else(|| out.to_path_buf());
    let (spec, meta) = load_problem(&dir)?;
    let b = a.tile.unwrap_or(meta.tile);
    if b == 0 || b > spec.n() {
        return Err(usage(format!("--tile must lie in 1..={}", spec.n())));
    }
    let m = tlr::build_tlr(&spec, b, a.eps, compressor(a.compressor, a.bs, seed))?;
    tlr::write_tlr(&m, out.join(MATRIX_FILE))?;
    write_memory_csv(&out.join("memory.csv"), &m)?;
    write_ranks_csv(&out.join("ranks.csv"), &m.rank_heatmap())?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// `n,tile,nb,eps,total_bytes,dense_bytes,low_rank_bytes,total_rank,average_rank`.
pub fn write_memory_csv(path: &Path, m: &TlrMatrix) -> Result<()> {
    let r = tlr::memory_report(m);
    let mut w = csv_writer(path)?;
    w.write_record(["n", "tile", "nb", "eps", "total_bytes", "dense_bytes", "low_rank_bytes", "total_rank", "average_rank"])?;
    w.write_record([
        m.n().to_string(),
        m.tile_size().to_string(),
        m.nb().to_string(),
        format!("{:e}", m.eps()),
        r.total_bytes.to_string(),
        r.dense_bytes.to_string(),
        r.low_rank_bytes.to_string(),
        m.total_rank().to_string(),
        format!("{:.6}", m.average_rank()),
    ])?;
    w.flush()?;
    Ok(())
}

/// `i,j,rank` for every tile below the diagonal.
pub fn write_ranks_csv(path: &Path, heatmap: &[Vec<usize>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["i", "j", "rank"])?;
    for (i, row) in heatmap.iter().enumerate() {
        for (j, &r) in row.iter().enumerate().take(i) {
            w.write_record([i.to_string(), j.to_string(), r.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn validate_flags(f: &FactorFlags) -> Result<()> {
    if f.ara.bs == 0 {
        return Err(usage("--bs must be at least 1"));
    }
    if f.ara.buffers == Some(0) || f.ara.subset == Some(0) || f.ara.dense_buffers == 0 {
        return Err(usage("--buffers, --dense-buffers and --subset must be at least 1"));
    }
    if !(f.diag_shift >= 0.0) || !f.diag_shift.is_finite() {
        return Err(usage(format!("--diag-shift must be nonnegative, got {}", f.diag_shift)));
    }
    Ok(())
}

fn run_factor(m: &TlrMatrix, eps: f64, flags: &FactorFlags, seed: u64) -> Result<TlrFactor> {
    let b = m.tile_size();
    let cfg = AraConfig::new(flags.ara.bs, eps, b, seed);
    factor::factorize(m.clone(), flags.mode, &cfg, &flags.ara.workspace(b), &flags.options())
}

pub fn cmd_factor(a: &FactorArgs, seed: u64, out: &Path) -> Result<()> {
    validate_flags(&a.flags)?;
    if let Some(e) = a.eps {
        check_eps(e, "--eps")?;
    }
    let path = a.matrix.clone().unwrap_or_else(|| out.join(MATRIX_FILE));
    check_exists(&path)?;
    let m = tlr::read_tlr(&path)?;
    let eps = a.eps.unwrap_or(m.eps());
    let f = run_factor(&m, eps, &a.flags, seed)?;
    factor::write_factor(&f, out.join(FACTOR_FILE))?;
    write_phases_csv(&out.join("phases.csv"), &f)?;
    write_columns_csv(&out.join("columns.csv"), &f)?;
    write_ranks_csv(&out.join("factor_ranks.csv"), &f.stats.rank_heatmap)?;
    if let Some(p) = f.perm() {
        let mut w = csv_writer(&out.join("pivots.csv"))?;
        w.write_record(["position", "tile"])?;
        for (k, t) in p.iter().enumerate() {
            w.write_record([k.to_string(), t.to_string()])?;
        }
        w.flush()?;
    }
    if a.power_iters > 0 {
        let mut target = m;
        if a.flags.diag_shift > 0.0 {
            target.add_to_diagonal(a.flags.diag_shift);
        }
        let r = solve::estimate_2norm_diff(&target, &f, a.power_iters, seed)?;
        let bound = 10.0 * f.l().nb() as f64 * eps;
        let mut file = fs::File::create(out.join("residual.txt"))?;
        writeln!(file, "residual {r:e}")?;
        writeln!(file, "bound {bound:e}")?;
        writeln!(file, "within_bound {}", r <= bound)?;
    }
    Ok(())
}

/// `phase,seconds`: the six phases, pivot selection, and the wall total.
pub fn write_phases_csv(path: &Path, f: &TlrFactor) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["phase", "time_s"])?;
    for (name, d) in f.stats.phases.rows() {
        w.write_record([name.to_string(), format!("{:.6}", d.as_secs_f64())])?;
    }
    w.write_record(["pivot_selection".to_string(), format!("{:.6}", f.stats.pivot_selection.as_secs_f64())])?;
    w.write_record(["total".to_string(), format!("{:.6}", f.stats.total.as_secs_f64())])?;
    w.write_record(["gemm_share".to_string(), format!("{:.4}", f.stats.gemm_share())])?;
    w.flush()?;
    Ok(())
}

/// `column,rounds,min_pivot,modified` per tile column of the factor.
pub fn write_columns_csv(path: &Path, f: &TlrFactor) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["column", "rounds", "min_pivot", "modified"])?;
    for k in 0..f.l().nb() {
        w.write_record([
            k.to_string(),
            f.stats.column_rounds.get(k).copied().unwrap_or(0).to_string(),
            format!("{:e}", f.stats.min_pivots.get(k).copied().unwrap_or(f64::NAN)),
            (f.stats.modified_columns.contains(&k) as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Right-hand side from `ones` or `random:SEED`.
pub fn parse_rhs(s: &str, n: usize) -> Result<Vec<f64>> {
    if s == "ones" {
        return Ok(vec![1.0; n]);
    }
    if let Some(seed) = s.strip_prefix("random:") {
        let seed: u64 = seed.parse().map_err(|_| usage(format!("bad rhs seed in '{s}'")))?;
        return Ok(crate::rng::gaussian_tile(&mut crate::rng::stream(seed, &[0x5105]), n, 1).into_data());
    }
    Err(usage(format!("--rhs must be 'ones' or 'random:SEED', got '{s}'")))
}

pub fn cmd_solve(a: &SolveArgs, seed: u64, out: &Path) -> Result<()> {
    check_eps(a.tol, "--tol")?;
    if let Some(e) = a.precond_eps {
        check_eps(e, "--precond-eps")?;
    }
    parse_rhs(&a.rhs, 0)?;
    let path = a.matrix.clone().unwrap_or_else(|| out.join(MATRIX_FILE));
    check_exists(&path)?;
    if let Some(f) = &a.factor {
        check_exists(f)?;
    }
    let m = tlr::read_tlr(&path)?;
    let f = match (&a.factor, a.precond_eps) {
        (Some(p), _) => Some(factor::read_factor(p)?),
        (None, Some(e)) => Some(shifted_preconditioner(&m, e, &a.ara, seed)?),
        (None, None) => None,
    };
    if let Some(f) = &f {
        if f.n() != m.n() {
            return Err(TlrError::Data(format!("factor of order {} for a matrix of order {}", f.n(), m.n())));
        }
    }
    let b = parse_rhs(&a.rhs, m.n())?;
    let (x, rep) = solve::pcg(&m, f.as_ref(), &b, a.tol, a.max_iter)?;
    write_cg_outputs(out, &rep)?;
    let mut w = csv_writer(&out.join("solution.csv"))?;
    w.write_record(["index", "value"])?;
    for (i, v) in x.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Cholesky factor of `A + eps I` at threshold `eps`.
pub fn shifted_preconditioner(m: &TlrMatrix, eps: f64, ara: &AraArgs, seed: u64) -> Result<TlrFactor> {
    let b = m.tile_size();
    let cfg = AraConfig::new(ara.bs, eps, b, seed);
    let opts = FactorOptions { diag_shift: eps, ..FactorOptions::for_mode(FactorMode::Cholesky) };
    factor::tlr_cholesky(m.clone(), &cfg, &ara.workspace(b), &opts)
}

fn write_cg_outputs(out: &Path, rep: &CgReport) -> Result<()> {
    let mut w = csv_writer(&out.join("cg.csv"))?;
    w.write_record(["iteration", "rel_residual"])?;
    for (i, r) in rep.rel_residual_history.iter().enumerate() {
        w.write_record([i.to_string(), format!("{r:e}")])?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "iterations": rep.iterations,
        "converged": rep.converged,
        "final_rel_residual": rep.rel_residual_history.last().copied().unwrap_or(0.0),
    });
    fs::write(out.join("cg.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let mut w = csv_writer(&out.join("solve_times.csv"))?;
    w.write_record(["time_apply_s", "time_precond_s"])?;
    w.write_record([format!("{:.6}", rep.apply_time.as_secs_f64()), format!("{:.6}", rep.solve_time.as_secs_f64())])?;
    w.flush()?;
    Ok(())
}

/// Column names of `bench.csv`; the `time_*` columns come last.
pub const BENCH_COLUMNS: [&str; 17] = [
    "kind",
    "n",
    "tile",
    "eps",
    "mode",
    "nb",
    "matrix_bytes",
    "matrix_average_rank",
    "factor_bytes",
    "factor_average_rank",
    "residual",
    "bound",
    "min_pivot",
    "time_build_s",
    "time_factor_s",
    "time_gemm_share",
    "time_residual_s",
];

pub fn cmd_bench(a: &BenchArgs, seed: u64, out: &Path) -> Result<()> {
    let kernel = kernel_of(&a.problem)?;
    validate_flags(&a.flags)?;
    for &b in &a.tile {
        if b == 0 || b > a.problem.n {
            return Err(usage(format!("--tile values must lie in 1..={}", a.problem.n)));
        }
    }
    for &e in &a.eps {
        check_eps(e, "--eps")?;
    }
    let points = geometry::generate_points(a.problem.kind, a.problem.n, seed)?;
    let mut w = csv_writer(&out.join("bench.csv"))?;
    w.write_record(BENCH_COLUMNS)?;
    for &b in &a.tile {
        let spec = ProblemSpec::new(geometry::kd_order(&points, b)?, kernel.clone())?;
        for &eps in &a.eps {
            let t0 = Instant::now();
            let m = tlr::build_tlr(&spec, b, eps, compressor(a.compressor, a.flags.ara.bs, seed))?;
            let t_build = t0.elapsed().as_secs_f64();
            let mem = tlr::memory_report(&m);
            let mut row = vec![
                a.problem.kind.to_string(),
                m.n().to_string(),
                b.to_string(),
                format!("{eps:e}"),
                a.flags.mode.to_string(),
                m.nb().to_string(),
                mem.total_bytes.to_string(),
                format!("{:.6}", m.average_rank()),
            ];
            let mut times = vec![format!("{t_build:.6}")];
            if a.build_only {
                row.extend(["", "", "", "", ""].map(String::from));
                times.extend(["", "", ""].map(String::from));
            } else {
                let f = run_factor(&m, eps, &a.flags, seed)?;
                let t1 = Instant::now();
                let r = if a.power_iters > 0 {
                    format!("{:e}", solve::estimate_2norm_diff(&m, &f, a.power_iters, seed)?)
                } else {
                    String::new()
                };
                let t_res = t1.elapsed().as_secs_f64();
                let min_pivot = f.stats.min_pivots.iter().copied().fold(f64::INFINITY, f64::min);
                row.extend([
                    f.bytes().to_string(),
                    format!("{:.6}", f.l().average_rank()),
                    r,
                    format!("{:e}", 10.0 * m.nb() as f64 * eps),
                    format!("{min_pivot:e}"),
                ]);
                times.extend([
                    format!("{:.6}", f.stats.total.as_secs_f64()),
                    format!("{:.4}", f.stats.gemm_share()),
                    format!("{t_res:.6}"),
                ]);
            }
            row.extend(times);
            w.write_record(&row)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_forms() {
        assert_eq!(parse_rhs("ones", 3).unwrap(), vec![1.0; 3]);
        assert_eq!(parse_rhs("random:4", 5).unwrap(), parse_rhs("random:4", 5).unwrap());
        assert!(matches!(parse_rhs("zeros", 3), Err(TlrError::Usage(_))));
        assert!(parse_rhs("random:x", 3).is_err());
    }

    #[test]
    fn missing_required_flag_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = main_with_args(["tlr", "generate", "--kind", "grid2d", "--tile", "4", "--out", out]);
        assert_eq!(code, 2);
        let code = main_with_args(["tlr", "generate", "--kind", "torus", "--n", "16", "--tile", "4", "--out", out]);
        assert_eq!(code, 2);
    }

    #[test]
    fn missing_input_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(main_with_args(["tlr", "factor", "--out", out]), 3);
        assert_eq!(main_with_args(["tlr", "build", "--eps", "1e-4", "--out", out]), 3);
    }
}
