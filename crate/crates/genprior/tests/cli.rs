use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use genprior::cli::main_with;
use genprior::format::{matrix_to_string, save_generator};
use genprior::trace_csv::{load_trace, read_summary, rows, TRACE_HEADER};
use genprior::{Algo, RunConfig, Setup};
use genprior_core::instance::reference_generator;
use genprior_core::{FeedforwardGenerator, Matrix};

const BASE: &str = r#"
[problem]
kind = "denoise_l2"
seed = 0

[generator]
file = "gen.toml"
geometry_pairs = 500

[algorithm]
algo = "admm"
rho = 0.1
alpha = 1.0
sigma0 = 1e-6
max_iters = 60
init_seed = 1
multiscale_stages = 2
multiscale_base = 10

[output]
dir = "out"
reference_factor = 3
"#;

fn workspace(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    save_generator(&reference_generator(), &dir.path().join("gen.toml")).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("genprior").chain(args.iter().copied());
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_writes_one_row_per_iteration() {
    let (dir, cfg) = workspace(BASE);
    let (code, stdout, stderr) = call(&["run", "--config", p(&cfg)]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("iters=60"));
    let trace_path = dir.path().join("out/trace_admm.csv");
    let text = fs::read_to_string(&trace_path).unwrap();
    assert_eq!(text.lines().next(), Some(TRACE_HEADER));
    assert_eq!(text.lines().count(), 61);

    let config = RunConfig::load(&cfg).unwrap();
    let setup = Setup::from_config(&config).unwrap();
    let run = genprior::driver::run_from_config(&setup, &config, Algo::Admm).unwrap();
    assert_eq!(load_trace(&trace_path).unwrap(), rows(&run.trace));
}

#[test]
fn early_stop_gives_fewer_rows() {
    let (dir, cfg) = workspace(&BASE.replace("max_iters = 60", "max_iters = 60\ntau_c = 1e-3"));
    let out = dir.path().join("short.csv");
    let (code, _, _) = call(&["run", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code, 0);
    let n = fs::read_to_string(&out).unwrap().lines().count() - 1;
    assert!((1..60).contains(&n), "{n} rows");
}

#[test]
fn compare_is_bit_reproducible() {
    let (dir, cfg) = workspace(BASE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(call(&["compare", "--config", p(&cfg), "--out-dir", p(&a)]).0, 0);
    assert_eq!(call(&["compare", "--config", p(&cfg), "--out-dir", p(&b)]).0, 0);
    for name in ["trace_gd.csv", "trace_admm.csv", "trace_eadmm.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let summary = read_summary(fs::File::open(a.join("summary.csv")).unwrap()).unwrap();
    let algos: Vec<&str> = summary.iter().map(|r| r.algo.as_str()).collect();
    assert_eq!(algos, ["gd", "admm", "eadmm"]);
    assert_eq!(summary[0].final_gap, 0.0);
    // eadmm runs the 2-stage schedule: 20 + 40 iterations
    assert_eq!(summary[2].iters, 60);
    assert!(summary.iter().all(|r| r.wall_ns == 0));
}

#[test]
fn compare_skips_exact_variant_with_nonsmooth_r() {
    let (dir, cfg) = workspace(&BASE.replace("denoise_l2", "denoise_linf"));
    let (code, stdout, stderr) = call(&["compare", "--config", p(&cfg)]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stderr.contains("skipping eadmm"));
    assert_eq!(stdout.lines().count(), 3);
    assert!(!dir.path().join("out/trace_eadmm.csv").exists());
}

#[test]
fn geometry_of_orthonormal_generator() {
    let dir = tempfile::tempdir().unwrap();
    let q = Matrix::from_row_slice(3, 2, &[0.6, 0.0, 0.8, 0.0, 0.0, 1.0]);
    let path = dir.path().join("lin.toml");
    save_generator(&FeedforwardGenerator::linear(q, 1.0).unwrap(), &path).unwrap();
    let (code, stdout, _) = call(&["estimate-geometry", "--generator", p(&path), "--pairs", "200", "--rho", "2"]);
    assert_eq!(code, 0);
    let get = |key: &str| -> f64 {
        let line = stdout.lines().find(|l| l.starts_with(&format!("{key}="))).unwrap();
        line.split_once('=').unwrap().1.parse().unwrap()
    };
    assert!((get("iota_hat") - 1.0).abs() < 1e-9);
    assert!((get("kappa_hat") - 1.0).abs() < 1e-9);
    assert!(get("nu_g_hat") <= 1e-9);
    assert_eq!(get("alpha"), 1.0);
    assert!((get("beta") - 0.5).abs() < 1e-9);
}

#[test]
fn config_errors_exit_1_with_machine_line() {
    let (_dir, cfg) = workspace(&BASE.replace("rho = 0.1", "rho = 0.1\nwhat = 3"));
    let (code, _, stderr) = call(&["run", "--config", p(&cfg)]);
    assert_eq!(code, 1);
    assert!(stderr.starts_with("error kind=config code=1 message=\""), "{stderr}");

    let (code, _, stderr) = call(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code, 1);
    assert!(stderr.starts_with("error kind=io"), "{stderr}");

    let (code, _, _) = call(&["frobnicate"]);
    assert_eq!(code, 1);
}

#[test]
fn divergence_exits_2_and_keeps_partial_trace() {
    let (dir, cfg) = workspace(&BASE.replace("alpha = 1.0", "alpha = 1e6"));
    let (code, _, stderr) = call(&["run", "--config", p(&cfg)]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("kind=numerical"));
    let rows = load_trace(&dir.path().join("out/trace_admm.csv")).unwrap();
    assert!(rows.len() < 60);
}

#[test]
fn plateau_sweep_needs_two_penalties() {
    let (dir, cfg) = workspace(BASE);
    let (code, _, stderr) = call(&["plateau-sweep", "--config", p(&cfg), "--rhos", "1"]);
    assert_eq!(code, 1, "{stderr}");
    let (code, stdout, stderr) = call(&["plateau-sweep", "--config", p(&cfg), "--rhos", "1,4", "--seeds", "1,2"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.starts_with("rho,gap_plateau,error_plateau,runs\n"));
    assert_eq!(fs::read_to_string(dir.path().join("out/plateau.csv")).unwrap(), stdout);
}

#[test]
fn tune_gd_reports_the_grid() {
    let (dir, cfg) = workspace(BASE);
    let (code, stdout, stderr) =
        call(&["tune-gd", "--config", p(&cfg), "--points", "4", "--budget", "50", "--starts", "2"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.starts_with("best_step="));
    let csv = fs::read_to_string(dir.path().join("out/tune_gd.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn observation_files_give_unplanted_problems() {
    let (dir, cfg) = workspace(&BASE.replace("seed = 0", "observation_file = \"y.txt\""));
    let y = Matrix::from_fn(8, 1, |i, _| 0.1 * i as f64);
    fs::write(dir.path().join("y.txt"), matrix_to_string(&y)).unwrap();
    let (code, _, stderr) = call(&["run", "--config", p(&cfg)]);
    assert_eq!(code, 0, "{stderr}");
    let rows = load_trace(&dir.path().join("out/trace_admm.csv")).unwrap();
    assert!(rows.iter().all(|r| r.dist_w.is_none() && r.dist_z.is_none()));

    fs::write(dir.path().join("y.txt"), "1 2 3\n").unwrap();
    assert_eq!(call(&["run", "--config", p(&cfg)]).0, 1);
}

#[test]
fn binary_exit_codes() {
    let (_dir, cfg) = workspace(BASE);
    let bin = env!("CARGO_BIN_EXE_genprior");
    let ok = Command::new(bin).args(["estimate-geometry", "--config", p(&cfg)]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["run", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error kind=io"));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["reference.toml", "cs_reference.toml", "linf_reference.toml"] {
        let config = RunConfig::load(&dir.join(name)).unwrap();
        Setup::from_config(&config).unwrap();
    }
}
