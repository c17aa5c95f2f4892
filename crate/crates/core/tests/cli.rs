use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tlr_core::dense::DenseTile;
use tlr_core::tlr::{memory_report, read_tlr, write_tlr, TlrMatrix};

fn tlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlr")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let o = tlr(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn code(args: &[&str]) -> i32 {
    tlr(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn residual_txt(path: &Path) -> (f64, f64, bool) {
    let text = fs::read_to_string(path).unwrap();
    let field = |name: &str| -> String {
        text.lines().find_map(|l| l.strip_prefix(name).map(|v| v.trim().to_string())).unwrap()
    };
    (field("residual").parse().unwrap(), field("bound").parse().unwrap(), field("within_bound") == "true")
}

/// Generates and builds a problem; returns the directory.
fn built(root: &Path, name: &str, gen: &[&str], build: &[&str]) -> PathBuf {
    let dir = root.join(name);
    let mut g = vec!["generate", "--out", p(&dir)];
    g.extend_from_slice(gen);
    ok(&g);
    let mut b = vec!["build", "--out", p(&dir)];
    b.extend_from_slice(build);
    ok(&b);
    dir
}

#[test]
fn generate_is_byte_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let d = t.path().join(name);
        ok(&["generate", "--kind", "ball3d", "--n", "3000", "--tile", "256", "--seed", seed, "--out", p(&d)]);
        (fs::read(d.join("points.tlrp")).unwrap(), fs::read(d.join("problem.json")).unwrap())
    };
    let a = run("a", "5");
    let b = run("b", "5");
    let c = run("c", "6");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
}

#[test]
fn large_parameter_set_generates() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("g");
    ok(&["generate", "--kind", "grid2d", "--n", "16384", "--kernel", "exp", "--ell", "0.1", "--tile", "1024", "--out", p(&d)]);
    assert_eq!(fs::metadata(d.join("points.tlrp")).unwrap().len(), 20 + 16384 * 2 * 8);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("problem.json")).unwrap()).unwrap();
    assert_eq!(meta["n"], 16384);
    assert_eq!(meta["tile"], 1024);
}

#[test]
fn exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let out = p(t.path());
    assert_eq!(code(&["generate", "--kind", "grid2d", "--tile", "8", "--out", out]), 2);
    assert_eq!(code(&["generate", "--kind", "torus", "--n", "64", "--tile", "8", "--out", out]), 2);
    assert_eq!(code(&["generate", "--kind", "grid2d", "--n", "64", "--tile", "8", "--ell", "-1", "--out", out]), 2);
    assert_eq!(code(&["--threads", "0", "generate", "--kind", "grid2d", "--n", "64", "--tile", "8", "--out", out]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    ok(&["generate", "--kind", "grid2d", "--n", "64", "--tile", "16", "--out", out]);
    assert_eq!(code(&["build", "--eps", "-1", "--out", out]), 2);
    ok(&["build", "--eps", "1e-6", "--out", out]);
    let m = p(&t.path().join("matrix.tlrm")).to_string();
    assert_eq!(code(&["solve", "--matrix", &m, "--factor", &m, "--precond-eps", "1e-2", "--out", out]), 2);
    assert_eq!(code(&["solve", "--matrix", &m, "--rhs", "twos", "--out", out]), 2);

    assert_eq!(code(&["factor", "--matrix", p(&t.path().join("missing.tlrm")), "--out", out]), 3);
    let bytes = fs::read(&m).unwrap();
    let cut = t.path().join("cut.tlrm");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(code(&["factor", "--matrix", p(&cut), "--out", out]), 3);
    assert_eq!(code(&["build", "--eps", "1e-6", "--problem", p(&t.path().join("nowhere")), "--out", out]), 3);

    let zero = TlrMatrix::block_diagonal(8, 1e-6, vec![DenseTile::zeros(8, 8); 2]).unwrap();
    let zpath = t.path().join("zero.tlrm");
    write_tlr(&zero, &zpath).unwrap();
    let o = tlr(&["factor", "--matrix", p(&zpath), "--mode", "ldl", "--out", out]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("column 0"));
}

#[test]
fn build_round_trip_and_csvs() {
    let t = tempfile::tempdir().unwrap();
    let d = built(t.path(), "b", &["--kind", "grid3d", "--n", "2000", "--ell", "0.2", "--tile", "256"], &["--eps", "1e-5"]);
    let m = read_tlr(d.join("matrix.tlrm")).unwrap();
    let r = memory_report(&m);
    let mem = csv_rows(&d.join("memory.csv"));
    assert_eq!(mem.len(), 1);
    assert_eq!(mem[0][0], "2000");
    assert_eq!(mem[0][1], "256");
    assert_eq!(mem[0][2], m.nb().to_string());
    assert_eq!(mem[0][4], r.total_bytes.to_string());
    assert_eq!(mem[0][5], r.dense_bytes.to_string());
    assert_eq!(mem[0][6], r.low_rank_bytes.to_string());
    let ranks = csv_rows(&d.join("ranks.csv"));
    assert_eq!(ranks.len(), m.nb() * (m.nb() - 1) / 2);
    for row in &ranks {
        let (i, j, k): (usize, usize, usize) = (row[0].parse().unwrap(), row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!(i > j);
        assert_eq!(m.rank(i, j), k);
    }
}

#[test]
fn svd_and_ara_ranks_agree_within_ten_percent() {
    let t = tempfile::tempdir().unwrap();
    let gen = ["--kind", "grid2d", "--n", "4096", "--tile", "256"];
    let total = |dir: &Path| -> usize { csv_rows(&dir.join("ranks.csv")).iter().map(|r| r[2].parse::<usize>().unwrap()).sum() };
    let svd = built(t.path(), "svd", &gen, &["--eps", "1e-6", "--compressor", "svd"]);
    let ara = built(t.path(), "ara", &gen, &["--eps", "1e-6", "--compressor", "ara", "--bs", "16"]);
    let (s, a) = (total(&svd) as f64, total(&ara) as f64);
    assert!((a - s).abs() <= 0.10 * s, "ara {a} svd {s}");
}

#[test]
fn factor_modes_on_the_3d_problem() {
    let t = tempfile::tempdir().unwrap();
    let d = built(t.path(), "p", &["--kind", "grid3d", "--n", "8192", "--ell", "0.2", "--tile", "512"], &["--eps", "1e-6"]);
    let m = p(&d.join("matrix.tlrm")).to_string();
    let mut residuals = Vec::new();
    for mode in ["chol", "ldl", "pivchol"] {
        let out = d.join(mode);
        ok(&["factor", "--matrix", &m, "--mode", mode, "--pivot-norm", "frob", "--eps", "1e-6", "--out", p(&out)]);
        let (res, bound, within) = residual_txt(&out.join("residual.txt"));
        assert!(within && res <= bound, "{mode}: {res} vs {bound}");
        assert!((bound - 10.0 * 16.0 * 1e-6).abs() < 1e-12);
        residuals.push(res);
        let phases = csv_rows(&out.join("phases.csv"));
        assert!(phases.iter().all(|r| r[1].parse::<f64>().unwrap() >= 0.0));
        assert_eq!(csv_rows(&out.join("columns.csv")).len(), 16);
        if mode == "pivchol" {
            let piv = csv_rows(&out.join("pivots.csv"));
            let tiles: BTreeSet<usize> = piv.iter().map(|r| r[1].parse().unwrap()).collect();
            assert_eq!(piv.len(), 16);
            assert_eq!(tiles, (0..16).collect());
        } else {
            assert!(!out.join("pivots.csv").exists());
        }
    }
    assert!(residuals[1] <= 2.0 * residuals[0], "ldl {} chol {}", residuals[1], residuals[0]);
}

#[test]
fn reruns_reproduce_numeric_outputs_at_any_thread_count() {
    let t = tempfile::tempdir().unwrap();
    let gen = ["--kind", "ball3d", "--n", "3000", "--ell", "0.2", "--tile", "256"];
    let run = |name: &str, threads: &str| {
        let d = t.path().join(name);
        ok(&["--threads", threads, "generate", "--out", p(&d), "--seed", "9", gen[0], gen[1], gen[2], gen[3], gen[4], gen[5], gen[6], gen[7]]);
        ok(&["--threads", threads, "--seed", "9", "build", "--eps", "1e-5", "--out", p(&d)]);
        ok(&["--threads", threads, "--seed", "9", "factor", "--mode", "pivchol", "--out", p(&d)]);
        ok(&["--threads", threads, "--seed", "9", "solve", "--factor", p(&d.join("factor.tlrf")), "--rhs", "random:3", "--out", p(&d)]);
        d
    };
    let a = run("a", "1");
    let b = run("b", "3");
    for f in [
        "points.tlrp", "problem.json", "matrix.tlrm", "memory.csv", "ranks.csv", "factor.tlrf", "columns.csv",
        "factor_ranks.csv", "pivots.csv", "residual.txt", "cg.csv", "cg.json", "solution.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn solve_writes_history_and_reports_non_convergence() {
    let t = tempfile::tempdir().unwrap();
    let d = built(t.path(), "s", &["--kind", "grid2d", "--n", "2048", "--tile", "256", "--nugget", "0.01"], &["--eps", "1e-8"]);
    let out = d.join("pre");
    ok(&["solve", "--precond-eps", "1e-4", "--out", p(&out), "--matrix", p(&d.join("matrix.tlrm"))]);
    let cg: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("cg.json")).unwrap()).unwrap();
    assert_eq!(cg["converged"], true);
    let iters = cg["iterations"].as_u64().unwrap() as usize;
    let hist = csv_rows(&out.join("cg.csv"));
    assert_eq!(hist.len(), iters + 1);
    assert_eq!(hist[0][1].parse::<f64>().unwrap(), 1.0);
    assert!(hist[iters][1].parse::<f64>().unwrap() <= 1e-6);
    assert_eq!(csv_rows(&out.join("solution.csv")).len(), 2048);
    assert_eq!(csv_rows(&out.join("solve_times.csv")).len(), 1);

    let capped = d.join("capped");
    ok(&["solve", "--max-iter", "1", "--out", p(&capped), "--matrix", p(&d.join("matrix.tlrm"))]);
    let cg: serde_json::Value = serde_json::from_str(&fs::read_to_string(capped.join("cg.json")).unwrap()).unwrap();
    assert_eq!(cg["converged"], false);
    assert_eq!(cg["iterations"], 1);
}

#[test]
fn bench_sweeps_tiles_and_thresholds() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("bench");
    ok(&["bench", "--kind", "grid2d", "--n", "2048", "--tile", "128,256", "--eps", "1e-3,1e-5", "--bs", "16", "--power-iters", "10", "--out", p(&out)]);
    let mut r = csv::Reader::from_path(out.join("bench.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    let first_time = header.iter().position(|h| h.starts_with("time_")).unwrap();
    assert!(header[first_time..].iter().all(|h| h.starts_with("time_")));
    assert!(header[..first_time].iter().all(|h| !h.starts_with("time_")));
    assert_eq!(r.records().count(), 4);
}
