use std::path::Path;
use std::process::{Command, Output};

use monopole::analysis::residual_norm;
use monopole::integrator::{classify, integrate, ClassifyMode, IntegratorControls};
use monopole::io::parse_profile_csv;
use monopole::{initial_state, ShootPoint};
use serde_json::Value;

fn monopole(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monopole"))
        .args(args)
        .env_remove("MONOPOLE_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(dir: &Path) -> serde_json::Map<String, Value> {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    match serde_json::from_str(&text).unwrap() {
        Value::Object(m) => m,
        other => panic!("report is not an object: {other}"),
    }
}

const FAST: [&str; 4] = ["--tol-alpha", "1e-9", "--tol-beta", "1e-9"];

#[test]
fn solve_writes_reproducible_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut args = vec!["solve", "--lambda-hat", "0", "--out", dir.path().to_str().unwrap()];
        args.extend(FAST);
        let o = monopole(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["profile.csv", "report.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between identical runs");
    }
    let r = report(a.path());
    assert!((r["alpha_star"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-3);
    assert!((r["beta_star"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-3);
    assert_eq!(r["converged"], Value::Bool(true));
}

#[test]
fn profile_round_trip_reproduces_residual() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--lambda-hat", "0", "--out", dir.path().to_str().unwrap()];
    args.extend(FAST);
    assert_eq!(code(&monopole(&args)), 0);
    let text = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(text.starts_with("t,f,fp,rho,rhop\n") && text.ends_with('\n'));
    let samples = parse_profile_csv(&text).unwrap();
    let reported = report(dir.path())["residual_norm"].as_f64().unwrap();
    let recomputed = residual_norm(&samples, 0.0).unwrap();
    assert!(
        (recomputed - reported).abs() <= 1e-14 * reported.abs().max(1e-300),
        "{recomputed} vs {reported}"
    );
}

#[test]
fn physical_triple_adds_physical_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "solve", "--lambda", "4", "--g0", "2", "--rho0", "1.5", "--out", dir.path().to_str().unwrap(),
    ];
    args.extend(FAST);
    assert_eq!(code(&monopole(&args)), 0);
    let r = report(dir.path());
    assert_eq!(r["lambda_hat"].as_f64(), Some(1.0));
    let (a, b) = (r["alpha_star"].as_f64().unwrap(), r["beta_star"].as_f64().unwrap());
    assert!((r["alpha_physical"].as_f64().unwrap() - a * 4.0 * 2.25).abs() < 1e-12);
    assert!((r["beta_physical"].as_f64().unwrap() - b * 2.0 * 2.25).abs() < 1e-12);
    let e = r["energy"].as_f64().unwrap();
    let m = r["mass_physical"].as_f64().unwrap();
    assert!((m - 4.0 * std::f64::consts::PI * 1.5 / 2.0 * e).abs() < 1e-12);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# overridden below\nlambda-hat = 1\ntol_alpha = 1e-9\ntol_beta = 1e-9\n").unwrap();
    let o = monopole(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--lambda-hat",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(report(dir.path())["lambda_hat"].as_f64(), Some(0.0));

    std::fs::write(&cfg, "lambda_hat = 0\nbogus = 1\n").unwrap();
    assert_eq!(code(&monopole(&["solve", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&monopole(&["solve"])), 1);
    assert_eq!(code(&monopole(&["solve", "--lambda-hat", "1", "--g0", "2"])), 1);
    assert_eq!(code(&monopole(&["solve", "--lambda", "1", "--g0", "2"])), 1);
    assert_eq!(code(&monopole(&["solve", "--lambda-hat", "-1"])), 1);
    assert_eq!(code(&monopole(&["solve", "--lambda-hat", "1", "--rel-tol", "0"])), 1);
    assert_eq!(code(&monopole(&["frobnicate"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let empty = monopole(&["sweep", "--lambda-hat", "0", "--alpha-grid", "", "--beta-grid", "0.3", "--out", out]);
    assert_eq!(code(&empty), 1);
    assert_eq!(code(&monopole(&["--help"])), 0);
}

#[test]
fn unwritable_output_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let mut args = vec!["solve", "--lambda-hat", "0", "--out", out.to_str().unwrap()];
    args.extend(FAST);
    assert_eq!(code(&monopole(&args)), 4);
}

#[test]
fn validate_passes_and_catches_mutation() {
    let o = monopole(&["validate"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert!(!text.contains("FAIL"));
    assert!(text.lines().filter(|l| l.ends_with("PASS")).count() >= 10);

    let loose = monopole(&["validate", "--rel-tol", "1e-4"]);
    assert_eq!(code(&loose), 0, "{}", String::from_utf8_lossy(&loose.stdout));
    assert!(String::from_utf8_lossy(&loose.stdout).contains("widening x7.0"));

    let mutated = monopole(&["validate", "--mutate-rhs"]);
    assert_eq!(code(&mutated), 3);
    assert!(String::from_utf8_lossy(&mutated.stdout).contains("FAIL"));
}

fn sweep_rows(args: &[&str], threads: Option<&str>) -> (i32, Vec<Vec<String>>) {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_monopole"));
    cmd.args(args).args(["--out", dir.path().to_str().unwrap()]);
    match threads {
        Some(n) => cmd.env("MONOPOLE_THREADS", n),
        None => cmd.env_remove("MONOPOLE_THREADS"),
    };
    let o = cmd.output().unwrap();
    let c = code(&o);
    if c != 0 {
        return (c, Vec::new());
    }
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text, String::from_utf8_lossy(&o.stdout));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,beta,outcome,t_event"));
    (c, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn sweep_rows_are_ordered_and_mixed() {
    let args = ["sweep", "--lambda-hat", "0", "--alpha-grid", "0.1,0.25", "--beta-grid", "0.3,0.4"];
    let (c, rows) = sweep_rows(&args, None);
    assert_eq!(c, 0);
    assert_eq!(rows.len(), 4);
    let alphas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let betas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(alphas, vec![0.1, 0.1, 0.25, 0.25]);
    assert_eq!(betas, vec![0.3, 0.4, 0.3, 0.4]);
    let tags: std::collections::BTreeSet<_> = rows.iter().map(|r| r[2].clone()).collect();
    assert!(tags.len() >= 2, "{tags:?}");

    let (c1, single_thread) = sweep_rows(&args, Some("1"));
    assert_eq!(c1, 0);
    assert_eq!(single_thread, rows);
    assert_eq!(sweep_rows(&args, Some("zero")).0, 1);
}

#[test]
fn single_cell_sweep_matches_classifier() {
    let (c, rows) = sweep_rows(&["sweep", "--lambda-hat", "1", "--alpha-grid", "0.3", "--beta-grid", "0.4"], None);
    assert_eq!(c, 0);
    let start = initial_state(ShootPoint::new(0.3, 0.4).unwrap(), 1.0, 1e-3).unwrap();
    let traj = integrate(&start, 1.0, &IntegratorControls::default()).unwrap();
    let o = classify(&traj, ClassifyMode::FFate).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], o.tag.to_string());
    let t: f64 = rows[0][3].parse().unwrap();
    assert_eq!(Some(t), o.t_event);
}

#[test]
fn probe_and_series_reports() {
    let o = monopole(&["probe", "--flat"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["first_zero"].as_f64().unwrap() - 4.4934).abs() < 1e-3);

    let o = monopole(&["series", "--alpha", "0.1666667", "--beta", "0.3333333", "--lambda-hat", "0"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["a4"].as_f64().unwrap() - 7.0 / 360.0).abs() < 1e-6);
    assert!((v["b3"].as_f64().unwrap() + 1.0 / 45.0).abs() < 1e-6);
    assert!(v["picard_sup_diffs"].as_array().unwrap().len() == 8);

    let o = monopole(&["series", "--alpha", "0", "--beta", "0"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["a4"].as_f64(), Some(0.0));
    assert_eq!(v["b3"].as_f64(), Some(0.0));
    assert_eq!(code(&monopole(&["series", "--alpha", "-1", "--beta", "0"])), 1);
}
