//! Seeded Monte Carlo sweeps over the sample-size control parameter θ.
//!
//! Every trial draws its own generator from a 64-bit mix of
//! `(base_seed, p, theta_index, trial_index)`, so a sweep is a pure function
//! of its configuration no matter how trials are scheduled across threads.

mod curve;
mod validate;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{lemma1_check, AMBIGUITY_TOL};
use crate::ensemble::{
    build_covariance, make_signal, observe, sample_design, sparsity_index, Covariance,
    CovarianceSpec, ProblemInstance, Regime,
};
use crate::solver::{recovery_success, solve_lasso, SolverOptions};
use crate::theory::ScheduleParams;
use crate::{Error, Matrix, Result};

pub use curve::{first_crossing, isotonic, transition_width, wilson_interval};
pub use validate::{validate_statistics, StatCheck, StatConfig, StatReport};

/// Covariance family of the design rows, independent of the dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    Identity,
    Toeplitz { rho: f64 },
    Custom { matrix: Vec<Vec<f64>> },
}

impl EnsembleSpec {
    pub fn covariance_spec(&self, p: usize) -> Result<CovarianceSpec> {
        match self {
            EnsembleSpec::Identity => Ok(CovarianceSpec::Identity { p }),
            EnsembleSpec::Toeplitz { rho } => Ok(CovarianceSpec::Toeplitz { p, rho: *rho }),
            EnsembleSpec::Custom { matrix } => {
                if matrix.len() != p || matrix.iter().any(|r| r.len() != p) {
                    return Err(Error::DimensionMismatch(format!(
                        "custom covariance must be {p}x{p}"
                    )));
                }
                Ok(CovarianceSpec::Custom(Matrix::from_fn(p, p, |i, j| {
                    matrix[i][j]
                })))
            }
        }
    }
}

/// How a trial is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    /// Sign pattern of the coordinate-descent solution.
    SolverSign,
    /// Exact recovery conditions; a fraction of trials is re-checked with the
    /// solver.
    Lemma1Predicate,
    /// Both must report success.
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub p_list: Vec<usize>,
    pub regime: Regime,
    pub alpha: f64,
    pub gamma: f64,
    pub ensemble: EnsembleSpec,
    pub sigma2: f64,
    pub signal_magnitude: f64,
    pub theta_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub success_mode: SuccessMode,
    /// Fraction of trials that also run the solver in
    /// [`SuccessMode::Lemma1Predicate`] mode.
    pub cross_check_fraction: f64,
}

/// 24 evenly spaced points `0.1, 0.2, …, 2.4`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=24).map(|k| k as f64 / 10.0).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p_list: vec![128, 256, 512],
            regime: Regime::FractionalPower,
            alpha: 0.40,
            gamma: 0.75,
            ensemble: EnsembleSpec::Identity,
            sigma2: 0.25,
            signal_magnitude: 0.5,
            theta_grid: default_theta_grid(),
            trials: 200,
            base_seed: 0,
            success_mode: SuccessMode::Lemma1Predicate,
            cross_check_fraction: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.p_list.is_empty() {
            return bad("p_list is empty".into());
        }
        if self.theta_grid.is_empty()
            || self.theta_grid.iter().any(|t| !(*t > 0.0 && t.is_finite()))
        {
            return bad("theta_grid must be a nonempty list of positive numbers".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be nonnegative, got {}", self.sigma2));
        }
        if !(self.signal_magnitude > 0.0 && self.signal_magnitude.is_finite()) {
            return bad(format!(
                "signal_magnitude must be positive, got {}",
                self.signal_magnitude
            ));
        }
        if !(0.0..=1.0).contains(&self.cross_check_fraction) {
            return bad("cross_check_fraction must lie in [0,1]".into());
        }
        Ok(())
    }
}

/// Per-trial seed.
pub fn trial_seed(base_seed: u64, p: usize, theta_index: usize, trial_index: usize) -> u64 {
    let mut h = splitmix64(base_seed);
    for part in [p as u64, theta_index as u64, trial_index as u64] {
        h = splitmix64(h ^ part.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Solver verdict on one trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverVerdict {
    pub success: bool,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub theta: f64,
    pub theta_index: usize,
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub lambda_n: f64,
    pub seed: u64,
    /// Final classification under the configured mode.
    pub success: bool,
    /// Exact-condition verdict; `None` when the support Gram was singular.
    pub success_lemma1: Option<bool>,
    /// Present when the solver ran on this trial.
    pub solver: Option<SolverVerdict>,
    pub ambiguous: bool,
    pub singular: bool,
    pub wall_time: Duration,
}

impl TrialOutcome {
    /// Predicate and solver both ran, the trial is unambiguous, and they
    /// disagree.
    pub fn disagrees(&self) -> bool {
        match (self.success_lemma1, self.solver) {
            (Some(a), Some(v)) => v.converged && !self.ambiguous && a != v.success,
            _ => false,
        }
    }
}

/// Dimension-level state shared by all trials at one `p`.
struct Geometry {
    p: usize,
    s: usize,
    cov: Covariance,
    schedules: Vec<ScheduleParams>,
}

/// A validated configuration with covariances and schedules prebuilt.
pub struct Experiment {
    config: ExperimentConfig,
    geometries: Vec<Geometry>,
    solver_opts: SolverOptions,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut geometries = Vec::with_capacity(config.p_list.len());
        for &p in &config.p_list {
            let s = sparsity_index(config.regime, p, config.alpha, config.gamma)?;
            let cov = build_covariance(&config.ensemble.covariance_spec(p)?)?;
            let schedules = config
                .theta_grid
                .iter()
                .map(|&theta| ScheduleParams::new(theta, s, p))
                .collect::<Result<Vec<_>>>()?;
            geometries.push(Geometry {
                p,
                s,
                cov,
                schedules,
            });
        }
        Ok(Self {
            config,
            geometries,
            solver_opts: SolverOptions::default(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Schedule for the `p_index`-th dimension and `theta_index`-th grid point.
    pub fn schedule(&self, p_index: usize, theta_index: usize) -> &ScheduleParams {
        &self.geometries[p_index].schedules[theta_index]
    }

    /// Row covariance at the `p_index`-th dimension.
    pub fn covariance(&self, p_index: usize) -> &Covariance {
        &self.geometries[p_index].cov
    }

    /// The problem instance drawn for one trial.
    pub fn instance(
        &self,
        p_index: usize,
        theta_index: usize,
        trial_index: usize,
    ) -> ProblemInstance {
        let geo = &self.geometries[p_index];
        let sched = geo.schedules[theta_index];
        let cfg = &self.config;
        let seed = trial_seed(cfg.base_seed, geo.p, theta_index, trial_index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signal = make_signal(geo.p, geo.s, cfg.signal_magnitude, &mut rng)
            .expect("sparsity validated at construction");
        let x = sample_design(&geo.cov, sched.n, &mut rng);
        observe(x, &signal, cfg.sigma2, &mut rng).expect("dimensions agree")
    }

    /// Runs a single trial. Identical arguments give identical outcomes
    /// (apart from `wall_time`).
    pub fn run_trial(
        &self,
        p_index: usize,
        theta_index: usize,
        trial_index: usize,
    ) -> TrialOutcome {
        let start = Instant::now();
        let geo = &self.geometries[p_index];
        let sched = geo.schedules[theta_index];
        let cfg = &self.config;
        let seed = trial_seed(cfg.base_seed, geo.p, theta_index, trial_index);
        let inst = self.instance(p_index, theta_index, trial_index);
        let signal = &inst.signal;

        let cert = lemma1_check(&inst.x, signal, &inst.w, sched.lambda_n, 0.0);
        let (success_lemma1, ambiguous, singular) = match &cert {
            Ok(c) => (Some(c.holds()), c.is_ambiguous(AMBIGUITY_TOL), false),
            Err(_) => (None, false, true),
        };

        let cross_check = unit_interval(splitmix64(seed ^ 0x5EED_C0DE)) < cfg.cross_check_fraction;
        let run_solver = match cfg.success_mode {
            SuccessMode::SolverSign | SuccessMode::Both => true,
            SuccessMode::Lemma1Predicate => ambiguous || cross_check,
        };
        let solver = run_solver.then(|| {
            let (sol, converged) =
                match solve_lasso(&inst.x, &inst.y, sched.lambda_n, &self.solver_opts) {
                    Ok(sol) => (sol, true),
                    Err(Error::NotConverged(sol)) => (*sol, false),
                    Err(e) => unreachable!("solver inputs validated: {e}"),
                };
            SolverVerdict {
                success: recovery_success(&sol.beta_hat, signal, self.solver_opts.zero_threshold)
                    .expect("dimensions agree"),
                converged,
                kkt_residual: sol.kkt_residual,
            }
        });
        let solver_says = solver.map(|v| v.converged && v.success);

        let success = if singular {
            false
        } else {
            let lemma1 = success_lemma1.unwrap_or(false);
            match cfg.success_mode {
                SuccessMode::SolverSign => solver_says.unwrap_or(false),
                SuccessMode::Lemma1Predicate if ambiguous => solver_says.unwrap_or(false),
                SuccessMode::Lemma1Predicate => lemma1,
                SuccessMode::Both if ambiguous => solver_says.unwrap_or(false),
                SuccessMode::Both => lemma1 && solver_says.unwrap_or(false),
            }
        };

        TrialOutcome {
            theta: sched.theta,
            theta_index,
            p: geo.p,
            s: geo.s,
            n: sched.n,
            lambda_n: sched.lambda_n,
            seed,
            success,
            success_lemma1,
            solver,
            ambiguous,
            singular,
            wall_time: start.elapsed(),
        }
    }

    fn n_trials(&self) -> usize {
        self.geometries.len() * self.config.theta_grid.len() * self.config.trials
    }

    /// All outcomes, ordered by `(p_index, theta_index, trial_index)`.
    pub fn run_all(&self, progress: Option<&(dyn Fn(Progress) + Sync)>) -> Vec<TrialOutcome> {
        let n_theta = self.config.theta_grid.len();
        let trials = self.config.trials;
        let total = self.n_trials();
        let done = AtomicUsize::new(0);
        (0..total)
            .into_par_iter()
            .map(|k| {
                let trial = k % trials;
                let theta_index = (k / trials) % n_theta;
                let p_index = k / (trials * n_theta);
                let out = self.run_trial(p_index, theta_index, trial);
                let completed = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(cb) = progress {
                    cb(Progress {
                        completed,
                        total,
                        p: out.p,
                        theta: out.theta,
                    });
                }
                out
            })
            .collect()
    }

    /// Runs every trial and aggregates per `(p, θ)` cell.
    pub fn run(&self, progress: Option<&(dyn Fn(Progress) + Sync)>) -> SweepResult {
        let outcomes = self.run_all(progress);
        self.aggregate(&outcomes)
    }

    fn aggregate(&self, outcomes: &[TrialOutcome]) -> SweepResult {
        let trials = self.config.trials;
        let mut cells: Vec<SweepCell> = outcomes
            .chunks(trials)
            .map(|chunk| {
                let first = &chunk[0];
                let successes = chunk.iter().filter(|o| o.success).count();
                let (ci_lo, ci_hi) = wilson_interval(successes, trials, 1.96);
                let residuals: Vec<f64> = chunk
                    .iter()
                    .filter_map(|o| o.solver.map(|v| v.kkt_residual))
                    .collect();
                SweepCell {
                    p: first.p,
                    regime: self.config.regime,
                    theta: first.theta,
                    s: first.s,
                    n: first.n,
                    lambda: first.lambda_n,
                    trials,
                    successes,
                    p_hat: successes as f64 / trials as f64,
                    ci_lo,
                    ci_hi,
                    ambiguous: chunk.iter().filter(|o| o.ambiguous).count(),
                    singular: chunk.iter().filter(|o| o.singular).count(),
                    solver_runs: residuals.len(),
                    disagreements: chunk.iter().filter(|o| o.disagrees()).count(),
                    mean_kkt_residual: if residuals.is_empty() {
                        0.0
                    } else {
                        residuals.iter().sum::<f64>() / residuals.len() as f64
                    },
                }
            })
            .collect();
        cells.sort_by(|a, b| a.p.cmp(&b.p).then(a.theta.total_cmp(&b.theta)));
        SweepResult { cells }
    }
}

/// Emitted after each finished trial.
#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
    pub p: usize,
    pub theta: f64,
}

/// Aggregated outcome of all trials at one `(p, θ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub p: usize,
    pub regime: Regime,
    pub theta: f64,
    pub s: usize,
    pub n: usize,
    pub lambda: f64,
    pub trials: usize,
    pub successes: usize,
    pub p_hat: f64,
    /// Wilson 95% interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Trials whose recovery margins were within [`AMBIGUITY_TOL`] of zero.
    pub ambiguous: usize,
    /// Trials with a numerically singular support Gram (scored as failures).
    pub singular: usize,
    pub solver_runs: usize,
    pub disagreements: usize,
    pub mean_kkt_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    /// Sorted by `(p, θ)`.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// Cells for one dimension, in θ order.
    pub fn curve(&self, p: usize) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| c.p == p).collect()
    }

    /// θ-width of `{lo ≤ p̂ ≤ hi}` on the monotone-smoothed curve at `p`.
    pub fn transition_width(&self, p: usize, lo: f64, hi: f64) -> Option<f64> {
        let curve = self.curve(p);
        let thetas: Vec<f64> = curve.iter().map(|c| c.theta).collect();
        let p_hat: Vec<f64> = curve.iter().map(|c| c.p_hat).collect();
        let weights: Vec<f64> = curve.iter().map(|c| c.trials as f64).collect();
        transition_width(&thetas, &p_hat, &weights, lo, hi)
    }
}

/// Runs a sweep on the global rayon pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    Ok(Experiment::new(config.clone())?.run(None))
}

/// Runs a sweep on a dedicated pool of `threads` workers. The result does
/// not depend on `threads`.
pub fn run_sweep_with(
    config: &ExperimentConfig,
    threads: usize,
    progress: Option<&(dyn Fn(Progress) + Sync)>,
) -> Result<SweepResult> {
    let exp = Experiment::new(config.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| exp.run(progress)))
}

/// Convenience wrapper building the experiment for a single trial.
pub fn run_trial(
    config: &ExperimentConfig,
    p: usize,
    theta_index: usize,
    trial_index: usize,
) -> Result<TrialOutcome> {
    let mut single = config.clone();
    single.p_list = vec![p];
    let exp = Experiment::new(single)?;
    if theta_index >= config.theta_grid.len() {
        return Err(Error::InvalidConfig(format!(
            "theta index {theta_index} out of range"
        )));
    }
    Ok(exp.run_trial(0, theta_index, trial_index))
}
