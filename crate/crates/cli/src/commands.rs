//! Subcommand implementations.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use lasso_lab::conditions::{compute_uv, design_report, lemma1_check, population_constants};
use lasso_lab::experiment::{
    run_sweep_with, validate_statistics, EnsembleSpec, Experiment, ExperimentConfig, Progress,
};
use lasso_lab::solver::{sign_pattern, solve_lasso, SolverOptions};
use lasso_lab::theory::{thresholds, toeplitz_eigen_extremes, ScheduleParams, ThresholdPair};

use crate::config::{ensemble_label, FileConfig, InstanceSection};
use crate::emit::{emit_results, fmt_g6};
use crate::{thread_count, CliError, Command, CommonArgs};

/// Reference threshold values reported for the Toeplitz ensemble with
/// `ρ = 0.1`, shown next to the computed ones.
pub const TOEPLITZ_REFERENCE: (f64, f64) = (0.46, 1.84);

pub fn execute(cmd: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let (args, text) = match cmd {
        Command::Solve(a) => {
            let cfg = load(a)?;
            (a, solve(&cfg, &cfg.solve)?)
        }
        Command::Check(a) => {
            let cfg = load(a)?;
            (a, check(&cfg, &cfg.check)?)
        }
        Command::Sweep(a) => (a, sweep(&load(a)?, a)?),
        Command::Thresholds(a) => (a, threshold_report(&load(a)?)?),
        Command::Validate(a) => {
            let (text, passed) = validate(&load(a)?)?;
            write_output(a, &text, out)?;
            return if passed {
                Ok(())
            } else {
                Err(CliError::Failed("statistical validation failed".into()))
            };
        }
    };
    write_output(args, &text, out)
}

fn write_output(args: &CommonArgs, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        }),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

/// Reads the configuration and applies the command-line overrides.
pub fn load(args: &CommonArgs) -> Result<FileConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.experiment.base_seed = seed;
        cfg.validate.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.experiment.trials = trials;
        cfg.validate.reps = trials;
    }
    cfg.experiment
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// A one-dimension, one-θ experiment for the selected instance.
fn single_experiment(
    cfg: &ExperimentConfig,
    sec: &InstanceSection,
) -> Result<Experiment, CliError> {
    let mut single = cfg.clone();
    single.p_list = vec![sec.p.unwrap_or(cfg.p_list[0])];
    single.theta_grid = vec![sec.theta.unwrap_or(1.0)];
    Experiment::new(single).map_err(CliError::from)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_g6(x)).collect();
    format!("[{}]", parts.join(","))
}

fn header(text: &mut String, sched: &ScheduleParams, lambda: f64, sec: &InstanceSection) {
    let _ = writeln!(
        text,
        "p={} s={} n={} theta={} lambda={} trial={}",
        sched.p,
        sched.s,
        sched.n,
        fmt_g6(sched.theta),
        fmt_g6(lambda),
        sec.trial
    );
}

fn solve(cfg: &FileConfig, sec: &InstanceSection) -> Result<String, CliError> {
    let exp = single_experiment(&cfg.experiment, sec)?;
    let sched = *exp.schedule(0, 0);
    let inst = exp.instance(0, 0, sec.trial);
    let lambda = sec.lambda.unwrap_or(sched.lambda_n);
    let mut opts = SolverOptions::default();
    if let Some(t) = sec.tol_kkt {
        opts.tol_kkt = t;
    }
    if let Some(m) = sec.max_iters {
        opts.max_iters = m;
    }
    let sol = solve_lasso(&inst.x, &inst.y, lambda, &opts)?;

    let truth = sign_pattern(inst.signal.beta(), 0.0);
    let estimate = sign_pattern(&sol.beta_hat, opts.zero_threshold);
    let support: Vec<f64> = inst
        .signal
        .support()
        .iter()
        .map(|&i| sol.beta_hat[i])
        .collect();
    let selected: Vec<String> = estimate
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(i, _)| i.to_string())
        .collect();

    let mut text = String::new();
    header(&mut text, &sched, lambda, sec);
    let _ = writeln!(text, "iterations={}", sol.iterations);
    let _ = writeln!(text, "objective={}", fmt_g6(sol.objective));
    let _ = writeln!(text, "kkt_residual={}", fmt_g6(sol.kkt_residual));
    let _ = writeln!(text, "support={:?}", inst.signal.support());
    let _ = writeln!(text, "selected=[{}]", selected.join(","));
    let _ = writeln!(text, "beta_hat_on_support={}", fmt_vec(&support));
    let _ = writeln!(text, "sign_recovered={}", truth == estimate);
    Ok(text)
}

fn check(cfg: &FileConfig, sec: &InstanceSection) -> Result<String, CliError> {
    let exp = single_experiment(&cfg.experiment, sec)?;
    let sched = *exp.schedule(0, 0);
    let inst = exp.instance(0, 0, sec.trial);
    let lambda = sec.lambda.unwrap_or(sched.lambda_n);
    let support = inst.signal.support();

    let cert = lemma1_check(&inst.x, &inst.signal, &inst.w, lambda, 0.0)?;
    let uv = compute_uv(&inst.x, &inst.signal, &inst.w, lambda)?;
    let report = design_report(&inst.x, exp.covariance(0), support)?;

    let mut text = String::new();
    header(&mut text, &sched, lambda, sec);
    let _ = writeln!(
        text,
        "cond_a={} margin_a={}",
        cert.cond_a,
        fmt_g6(cert.margin_a)
    );
    let _ = writeln!(
        text,
        "cond_b={} slack_b={}",
        cert.cond_b,
        fmt_g6(cert.slack_b)
    );
    let _ = writeln!(text, "margin_b={}", fmt_g6(cert.margin_b));
    let _ = writeln!(
        text,
        "event_mv={} event_mu={}",
        cert.event_mv, cert.event_mu
    );
    let _ = writeln!(
        text,
        "max_abs_u={} max_abs_v={}",
        fmt_g6(uv.u.amax()),
        fmt_g6(uv.v.amax())
    );
    let _ = writeln!(text, "rho_min={}", fmt_g6(inst.signal.rho_min()));
    let _ = writeln!(
        text,
        "epsilon_sample={} lambda_min_sample={}",
        fmt_g6(report.epsilon_sample),
        fmt_g6(report.lambda_min_sample)
    );
    let _ = writeln!(
        text,
        "epsilon={} c_min={} c_max={} d_max={}",
        fmt_g6(report.epsilon_pop),
        fmt_g6(report.c_min),
        fmt_g6(report.c_max),
        fmt_g6(report.d_max)
    );
    let _ = writeln!(text, "recovery={}", cert.holds());
    Ok(text)
}

fn sweep(cfg: &FileConfig, args: &CommonArgs) -> Result<String, CliError> {
    let threads = thread_count()?;
    let total =
        cfg.experiment.p_list.len() * cfg.experiment.theta_grid.len() * cfg.experiment.trials;
    let step = (total / 20).max(1);
    let last = AtomicUsize::new(0);
    let report = |p: Progress| {
        let bucket = p.completed / step;
        if p.completed == p.total || last.fetch_max(bucket, Ordering::Relaxed) < bucket {
            eprintln!(
                "progress {}/{} (p={}, theta={})",
                p.completed,
                p.total,
                p.p,
                fmt_g6(p.theta)
            );
        }
    };
    let progress: Option<&(dyn Fn(Progress) + Sync)> =
        if args.quiet { None } else { Some(&report) };
    let result = run_sweep_with(&cfg.experiment, threads, progress)?;
    Ok(emit_results(&result, args.format.into()))
}

/// Population constants used for the thresholds, with their origin.
fn resolve_constants(cfg: &FileConfig) -> Result<(f64, f64, f64, &'static str), CliError> {
    let t = &cfg.thresholds;
    if let (Some(a), Some(b), Some(e)) = (t.c_min, t.c_max, t.epsilon) {
        return Ok((a, b, e, "configured"));
    }
    let (c_min, c_max, epsilon, origin) = match &cfg.experiment.ensemble {
        EnsembleSpec::Identity => (1.0, 1.0, 1.0, "identity"),
        EnsembleSpec::Toeplitz { rho } => {
            let (lo, hi) = toeplitz_eigen_extremes(*rho)?;
            (
                lo,
                hi,
                support_epsilon(cfg)?,
                "symbol extremes, sampled support",
            )
        }
        EnsembleSpec::Custom { .. } => {
            let exp = single_experiment(&cfg.experiment, &InstanceSection::default())?;
            let inst = exp.instance(0, 0, 0);
            let pc = population_constants(exp.covariance(0), inst.signal.support())?;
            (pc.c_min, pc.c_max, pc.epsilon, "sampled support")
        }
    };
    Ok((
        t.c_min.unwrap_or(c_min),
        t.c_max.unwrap_or(c_max),
        t.epsilon.unwrap_or(epsilon),
        origin,
    ))
}

/// Incoherence of the support drawn for trial 0 at the first dimension.
fn support_epsilon(cfg: &FileConfig) -> Result<f64, CliError> {
    let exp = single_experiment(&cfg.experiment, &InstanceSection::default())?;
    let inst = exp.instance(0, 0, 0);
    Ok(population_constants(exp.covariance(0), inst.signal.support())?.epsilon)
}

fn threshold_report(cfg: &FileConfig) -> Result<String, CliError> {
    let (c_min, c_max, epsilon, origin) = resolve_constants(cfg)?;
    let ThresholdPair { theta_l, theta_u } = thresholds(c_min, c_max, epsilon)?;
    let e = &cfg.experiment;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "ensemble={} constants={origin}",
        ensemble_label(&e.ensemble)
    );
    let _ = writeln!(
        text,
        "c_min={} c_max={} epsilon={}",
        fmt_g6(c_min),
        fmt_g6(c_max),
        fmt_g6(epsilon)
    );
    let _ = writeln!(text, "theta_l={theta_l:?} theta_u={theta_u:?}");
    if let EnsembleSpec::Toeplitz { rho } = e.ensemble {
        let (ref_l, ref_u) = TOEPLITZ_REFERENCE;
        let _ = writeln!(
            text,
            "reference (rho=0.1): theta_l={ref_l} theta_u={ref_u} diff_l={} diff_u={}{}",
            fmt_g6(theta_l - ref_l),
            fmt_g6(theta_u - ref_u),
            if rho == 0.1 {
                ""
            } else {
                " (reference is for a different rho)"
            }
        );
    }
    for &p in &e.p_list {
        let s = lasso_lab::ensemble::sparsity_index(e.regime, p, e.alpha, e.gamma)?;
        let lo = ScheduleParams::new(theta_l, s, p)?;
        let hi = ScheduleParams::new(theta_u, s, p)?;
        let _ = writeln!(
            text,
            "p={p} s={s} n(theta_l)={} n(theta_u)={} lambda(theta_l)={} lambda(theta_u)={}",
            lo.n,
            hi.n,
            fmt_g6(lo.lambda_n),
            fmt_g6(hi.lambda_n)
        );
    }
    Ok(text)
}

fn validate(cfg: &FileConfig) -> Result<(String, bool), CliError> {
    let report = validate_statistics(&cfg.validate)?;
    let mut text = String::new();
    let v = &cfg.validate;
    let _ = writeln!(
        text,
        "n={} s={} p={} sigma2={} lambda={} reps={} ensemble={}",
        v.n,
        v.s,
        v.p,
        fmt_g6(v.sigma2),
        fmt_g6(v.lambda),
        v.reps,
        ensemble_label(&v.ensemble)
    );
    for c in &report.checks {
        let _ = writeln!(
            text,
            "{} {} estimate={} expected={}{}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            fmt_g6(c.estimate),
            fmt_g6(c.expected),
            c.z_score
                .map_or(String::new(), |z| format!(" z={}", fmt_g6(z))),
            c.rel_error
                .map_or(String::new(), |r| format!(" rel_error={}", fmt_g6(r)))
        );
    }
    Ok((text, report.all_passed()))
}
