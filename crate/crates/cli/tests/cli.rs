use std::path::{Path, PathBuf};
use std::process::Command;

use lasso_lab::ensemble::Regime;
use lasso_lab::experiment::{wilson_interval, SweepCell, SweepResult};
use lasso_lab_cli::emit::{fmt_g6, parse_jsonl, rows, to_jsonl};
use lasso_lab_cli::{emit_results, run, Format};
use proptest::prelude::*;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Runs the CLI in-process, returning (exit code, stdout, stderr).
fn cli(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["lasso-phase-lab"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn golden_sweep_csv() {
    let config = golden("small.json");
    let (code, out, err) = cli(&["sweep", "--config", config.to_str().unwrap(), "--quiet"]);
    assert_eq!(code, 0, "{err}");
    let expected = std::fs::read_to_string(golden("small.csv")).unwrap();
    assert_eq!(out, expected);
}

#[test]
fn single_cell_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "one.json",
        r#"{"p_list":[40],"theta_grid":[1.0],"trials":1}"#,
    );
    let (code, out, _) = cli(&["sweep", "--config", &cfg, "--quiet"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "p,regime,theta,s,n,lambda,trials,successes,p_hat,ci_lo,ci_hi,ambiguous"
    );
    let p_hat = lines[1].split(',').nth(8).unwrap();
    assert!(p_hat == "0" || p_hat == "1");
}

#[test]
fn repeated_sweeps_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden("small.json");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("run{k}.jsonl"));
        let (code, out, _) = cli(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            path.to_str().unwrap(),
            "--format",
            "jsonl",
            "--quiet",
        ]);
        assert_eq!(code, 0);
        assert!(out.is_empty());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(to_jsonl(&parse_jsonl(&text).unwrap()), text);
}

#[test]
fn flags_override_config() {
    let cfg = golden("small.json");
    let base = cli(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--quiet",
        "--trials",
        "2",
    ])
    .1;
    assert!(base
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(6) == Some("2")));
    let reseeded = cli(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--quiet",
        "--trials",
        "2",
        "--seed",
        "1",
    ])
    .1;
    let again = cli(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--quiet",
        "--trials",
        "2",
        "--seed",
        "1",
    ])
    .1;
    assert_eq!(reseeded, again);
}

#[test]
fn identity_thresholds() {
    let (code, out, _) = cli(&["thresholds"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "theta_l=1.0 theta_u=1.0"), "{out}");
}

#[test]
fn toeplitz_thresholds_show_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "t.json",
        r#"{"p_list":[128],"regime":"sublinear","ensemble":{"kind":"toeplitz","rho":0.1}}"#,
    );
    let (code, out, _) = cli(&["thresholds", "--config", &cfg]);
    assert_eq!(code, 0);
    assert!(out.contains("theta_l=0.46 theta_u=1.84"), "{out}");
    assert!(out.contains("c_min=0.818182 c_max=1.22222"), "{out}");
}

#[test]
fn solve_and_check_report() {
    let (code, out, _) = cli(&["solve"]);
    assert_eq!(code, 0);
    for key in [
        "kkt_residual=",
        "beta_hat_on_support=",
        "selected=",
        "sign_recovered=",
    ] {
        assert!(out.contains(key), "{out}");
    }
    let (code, out, _) = cli(&["check"]);
    assert_eq!(code, 0);
    for key in [
        "cond_a=",
        "cond_b=",
        "epsilon_sample=",
        "d_max=",
        "recovery=",
    ] {
        assert!(out.contains(key), "{out}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["frobnicate"]).0, 1);
    assert_eq!(cli(&["sweep", "--format", "xml"]).0, 1);
    assert_eq!(cli(&["sweep", "--config", "/nonexistent/config.json"]).0, 1);
    let typo = write_config(&dir, "typo.json", r#"{"trails":5}"#);
    let (code, _, err) = cli(&["sweep", "--config", &typo]);
    assert_eq!(code, 1);
    assert!(err.contains("trails"), "{err}");
    let bad = write_config(&dir, "bad.json", r#"{"trials":0}"#);
    assert_eq!(cli(&["sweep", "--config", &bad]).0, 1);
    assert_eq!(cli(&["--help"]).0, 0);
}

#[test]
fn numerical_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        &dir,
        "npd.json",
        r#"{"p_list":[4],"regime":"linear","alpha":0.5,
            "ensemble":{"kind":"custom","matrix":[[1,2,0,0],[2,1,0,0],[0,0,1,0],[0,0,0,1]]}}"#,
    );
    let (code, _, err) = cli(&["solve", "--config", &cfg]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("positive definite"), "{err}");
    let cfg = write_config(&dir, "dof.json", r#"{"validate":{"n":8,"s":5}}"#);
    assert_eq!(cli(&["validate", "--config", &cfg]).0, 2);
}

#[test]
fn thread_variable_is_validated() {
    let bin = env!("CARGO_BIN_EXE_lasso-phase-lab");
    let cfg = golden("small.json");
    let bad = Command::new(bin)
        .args(["sweep", "--quiet", "--config", cfg.to_str().unwrap()])
        .env("LPL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let good = Command::new(bin)
        .args(["sweep", "--quiet", "--config", cfg.to_str().unwrap()])
        .env("LPL_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(good.status.code(), Some(0));
    assert_eq!(good.stdout, std::fs::read(golden("small.csv")).unwrap());
}

fn arb_cell() -> impl Strategy<Value = SweepCell> {
    (
        16usize..5000,
        0.001f64..5.0,
        1usize..500,
        0.0f64..1.0,
        1.0e-3f64..2.0,
        0usize..3,
    )
        .prop_map(|(p, theta, trials, frac, lambda, regime)| {
            let successes = (frac * trials as f64) as usize;
            let (ci_lo, ci_hi) = wilson_interval(successes, trials, 1.96);
            SweepCell {
                p,
                regime: [Regime::Linear, Regime::Sublinear, Regime::FractionalPower][regime],
                theta,
                s: 1 + p / 10,
                n: 3 + p,
                lambda,
                trials,
                successes,
                p_hat: successes as f64 / trials as f64,
                ci_lo,
                ci_hi,
                ambiguous: trials - successes,
                singular: 0,
                solver_runs: 0,
                disagreements: 0,
                mean_kkt_residual: 0.0,
            }
        })
}

proptest! {
    #[test]
    fn g6_is_close_and_stable(v in prop::num::f64::NORMAL) {
        let text = fmt_g6(v);
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-6 * v.abs());
        prop_assert_eq!(fmt_g6(back), text);
    }

    #[test]
    fn jsonl_round_trip(cells in prop::collection::vec(arb_cell(), 0..8)) {
        let result = SweepResult { cells };
        let jsonl = emit_results(&result, Format::Jsonl);
        let csv = emit_results(&result, Format::Csv);
        prop_assert_eq!(jsonl.lines().count(), csv.lines().count() - 1);
        let parsed = parse_jsonl(&jsonl).unwrap();
        prop_assert_eq!(&parsed, &rows(&result));
        prop_assert_eq!(to_jsonl(&parsed), jsonl);
    }
}
