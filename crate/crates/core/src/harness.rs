//! Monte Carlo experiments around the oracle inequality: violation rates
//! with a calibrated `C`, error against rank and against `ε`, and sharpness
//! of the oracle term.
//!
//! Trial `i` draws its dataset with seed `mix_seed(master, i)`; `S★` and the
//! `Δ` estimate use two reserved stream indices. Trials run on a rayon pool
//! and are collected in index order, so the worker count never changes a
//! result.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    beta_uniform_basis, epsilon_threshold, estimate_delta, BoundContext, BoundReport,
    ConstantsConfig, RademacherStats,
};
use crate::config::{DesignSpec, EpsilonRule, ExperimentConfig};
use crate::design::{
    orthonormal_basis_design, sample_dataset, sup_bound_a, DesignDistribution, RiskModel,
    TruthModel,
};
use crate::error::{Error, Result};
use crate::loss::{exponential_loss, loss_constants, LossConstants, LossModel, SquaredLoss};
use crate::matrix::SymmetricMatrix;
use crate::seed::mix_seed;
use crate::solver::{certificate, solve, ConstraintSet, SolverConfig};

/// Stream index reserved for drawing the eigenvectors of `S★`.
pub const TRUTH_STREAM: u64 = u64::MAX;
/// Stream index reserved for the `Δ` estimate.
pub const DELTA_STREAM: u64 = u64::MAX - 1;
/// Tolerance used when certifying each trial's solution.
pub const CERTIFY_TOL: f64 = 1e-5;
/// Grid for `L(a)`, `τ(a)` per setup; the built-in losses' closed forms
/// are cross-checked against it.
pub const SETUP_GRID_SIZE: usize = 1_000;

/// Execution knobs that must not affect results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: Some(workers),
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(Error::input("worker count must be at least 1"));
            }
            builder = builder.num_threads(w);
        }
        builder
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    /// Runs `f` inside a pool sized by these options.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        Ok(self.pool()?.install(f))
    }
}

/// `Σ λ_k v_k v_kᵀ` with `v_k` the first columns of a Haar-random
/// orthogonal matrix drawn from `seed`.
pub fn random_truth(m: usize, eigenvalues: &[f64], seed: u64) -> Result<SymmetricMatrix> {
    if eigenvalues.len() > m {
        return Err(Error::input("more eigenvalues than dimensions"));
    }
    if eigenvalues.is_empty() {
        return Ok(SymmetricMatrix::zeros(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for k in 0..m {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    let cols = q.columns(0, eigenvalues.len()).into_owned();
    Ok(SymmetricMatrix::from_eigen(&cols, eigenvalues))
}

/// A config with everything derived: design, truth, loss, constants, `ε`.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub design: DesignDistribution,
    pub truth: TruthModel,
    pub loss: LossModel,
    pub risk: RiskModel,
    /// `a = sup_{S∈D} max_k |⟨S, X_k⟩|`.
    pub a: f64,
    pub loss_constants: LossConstants,
    pub q: f64,
    pub delta: Option<RademacherStats>,
    pub epsilon_threshold: Option<f64>,
    pub epsilon: f64,
}

impl Setup {
    /// Resolves `config`; the `Δ` estimate, when needed, runs on the
    /// current rayon pool.
    pub fn resolve(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.experiment.seed;
        let design = match config.design {
            DesignSpec::OrthonormalBasis { m } => orthonormal_basis_design(m)?,
        };
        let m = design.dim();
        let s_star = random_truth(m, &config.truth.eigenvalues(), mix_seed(seed, TRUTH_STREAM))?;
        let truth = TruthModel::new(s_star, config.truth.noise.clone())?;
        let a = sup_bound_a(&config.constraint, &design)?;
        let loss: LossModel = match config.loss.name.as_str() {
            // responses live in [−y_max, y_max]; widening to [−a, a] keeps
            // the constants valid when the responses are smaller than a
            "squared" => {
                let bound = truth.response_bound(&design)?.max(a);
                std::sync::Arc::new(SquaredLoss::with_response_bound(bound))
            }
            "exponential" => exponential_loss(),
            other => {
                return Err(Error::Config(format!(
                    "unknown loss `{other}` (expected \"squared\" or \"exponential\")"
                )))
            }
        };
        let constants = loss_constants(loss.as_ref(), a, SETUP_GRID_SIZE)?;
        let q = loss.q(a);
        let risk = RiskModel::new(&design, &truth, loss.clone())?;
        let n = config.experiment.n;
        let (delta, threshold, epsilon) = match config.epsilon {
            EpsilonRule::Absolute { value } => (None, None, value),
            EpsilonRule::ThresholdMultiple {
                multiple,
                delta_reps,
            } => {
                let stats = estimate_delta(&design, n, delta_reps, mix_seed(seed, DELTA_STREAM))?;
                let thr = epsilon_threshold(&config.bound.constants, constants.l_a, stats.delta, n);
                (Some(stats), Some(thr), multiple * thr)
            }
        };
        log::debug!(
            "resolved setup: m={m} a={a:.4} L(a)={:.4} tau(a)={:.4} Q={q:.4} eps={epsilon:.6}",
            constants.l_a,
            constants.tau_a
        );
        Ok(Self {
            config: config.clone(),
            design,
            truth,
            loss,
            risk,
            a,
            loss_constants: constants,
            q,
            delta,
            epsilon_threshold: threshold,
            epsilon,
        })
    }

    pub fn constraint(&self) -> &ConstraintSet {
        &self.config.constraint
    }

    pub fn constants(&self) -> &ConstantsConfig {
        &self.config.bound.constants
    }

    pub fn solver_config(&self, epsilon: f64) -> SolverConfig {
        SolverConfig {
            epsilon,
            ..self.config.solver
        }
    }

    pub fn bound_context(&self, epsilon: f64) -> BoundContext<'_> {
        BoundContext {
            risk: &self.risk,
            loss_constants: self.loss_constants,
            q: self.q,
            n: self.config.experiment.n,
            epsilon,
            t: self.config.bound.t,
            constants: *self.constants(),
            beta: None,
        }
    }

    /// Seed of trial `index`.
    pub fn trial_seed(&self, index: usize) -> u64 {
        mix_seed(self.config.experiment.seed, index as u64)
    }
}

/// One trial, flattened for `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    pub lhs: f64,
    pub oracle_excess: f64,
    pub oracle_rank: usize,
    pub oracle_nuclear: f64,
    pub beta: f64,
    pub rank_term: f64,
    pub nuclear_term: f64,
    pub min_term: f64,
    pub t_s_eps: f64,
    pub c_of_a: f64,
    pub residual_term: f64,
    pub rhs: f64,
    pub violated: bool,
    /// Smallest `C` under which this trial is not a violation.
    pub required_c: f64,
    pub s_hat_rank: usize,
    pub s_hat_nuclear: f64,
    pub kkt_low_rank: f64,
    pub kkt_spectral: f64,
    pub constraint_violation: f64,
    pub fixed_point_residual: f64,
    pub certified: bool,
    /// `‖Ŝ‖₁ ≤ Q/ε`.
    pub apriori_ok: bool,
    /// Seconds spent solving. Not written to `trials.csv` (which must be
    /// reproducible); see `timings.csv`.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Column order of `trials.csv`.
pub const TRIAL_COLUMNS: [&str; 27] = [
    "trial",
    "seed",
    "epsilon",
    "converged",
    "iterations",
    "lhs",
    "oracle_excess",
    "oracle_rank",
    "oracle_nuclear",
    "beta",
    "rank_term",
    "nuclear_term",
    "min_term",
    "t_s_eps",
    "c_of_a",
    "residual_term",
    "rhs",
    "violated",
    "required_c",
    "s_hat_rank",
    "s_hat_nuclear",
    "kkt_low_rank",
    "kkt_spectral",
    "constraint_violation",
    "fixed_point_residual",
    "certified",
    "apriori_ok",
];

/// A trial's record together with its estimate.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub s_hat: SymmetricMatrix,
}

/// Solves trial `index` and scores it against `oracle`.
pub fn run_trial(
    setup: &Setup,
    epsilon: f64,
    index: usize,
    oracle: &SymmetricMatrix,
) -> Result<TrialOutcome> {
    let seed = setup.trial_seed(index);
    let data = sample_dataset(&setup.design, &setup.truth, setup.config.experiment.n, seed)?;
    let start = Instant::now();
    let result = solve(
        &data,
        setup.loss.as_ref(),
        &setup.solver_config(epsilon),
        setup.constraint(),
    )?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let s_hat = result.s_hat;
    let lhs = setup.risk.excess_risk(&s_hat)?;
    let report = setup.bound_context(epsilon).assemble(oracle, lhs)?;
    let cert = certificate(&s_hat, &data, setup.loss.as_ref(), epsilon, setup.constraint())?;
    let s_hat_nuclear = s_hat.nuclear_norm();
    let apriori_ok = epsilon == 0.0 || s_hat_nuclear <= setup.q / epsilon * (1.0 + 1e-9);
    if !result.converged {
        log::warn!(
            "trial {index}: solver stopped after {} iterations (residual {:.3e} > {:.3e})",
            result.iterations,
            result.fixed_point_residual,
            result.grad_tol
        );
    }
    let record = TrialRecord {
        trial: index,
        seed,
        epsilon,
        converged: result.converged,
        iterations: result.iterations,
        lhs,
        oracle_excess: report.oracle_excess,
        oracle_rank: report.oracle_rank,
        oracle_nuclear: report.oracle_nuclear,
        beta: report.beta,
        rank_term: report.rank_term,
        nuclear_term: report.nuclear_term,
        min_term: report.min_term,
        t_s_eps: report.t_s_eps,
        c_of_a: report.c_of_a,
        residual_term: report.residual_term,
        rhs: report.rhs,
        violated: report.violated,
        required_c: report.required_c(setup.constants()),
        s_hat_rank: s_hat.rank(s_hat.default_zero_tol()),
        s_hat_nuclear,
        kkt_low_rank: cert.kkt.low_rank_residual,
        kkt_spectral: cert.kkt.spectral_excess,
        constraint_violation: cert.constraint_violation,
        fixed_point_residual: result.fixed_point_residual,
        certified: cert.passes(CERTIFY_TOL),
        apriori_ok,
        wall_time_s,
    };
    Ok(TrialOutcome { record, s_hat })
}

/// Runs every trial of `setup` at `epsilon` against `oracle`, in parallel on
/// the current pool, ordered by trial index.
pub fn run_trials(
    setup: &Setup,
    epsilon: f64,
    oracle: &SymmetricMatrix,
) -> Result<Vec<TrialOutcome>> {
    (0..setup.config.experiment.trials)
        .into_par_iter()
        .map(|i| run_trial(setup, epsilon, i, oracle))
        .collect()
}

/// Order statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub mean: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q05: at(0.05),
            q25: at(0.25),
            median: at(0.5),
            q75: at(0.75),
            q95: at(0.95),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

/// Smallest `C` whose violation frequency is at most `target`, given each
/// trial's required `C`.
///
/// Violations at `C` are the trials with `required_c > C`, so allowing
/// `k = ⌊target·N⌋` of them gives the `(k+1)`-th largest required value.
pub fn calibrate_c(required: &[f64], target: f64) -> f64 {
    let n = required.len();
    if n == 0 {
        return 0.0;
    }
    let k = (target * n as f64 + 1e-9).floor() as usize;
    if k >= n {
        return 0.0;
    }
    let mut v = required.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[k].max(0.0)
}

/// Fraction of trials with `required_c > c`.
pub fn violation_frequency_at(required: &[f64], c: f64) -> f64 {
    if required.is_empty() {
        return 0.0;
    }
    required.iter().filter(|r| **r > c).count() as f64 / required.len() as f64
}

/// `target + 3·√(target(1 − target)/trials)`.
pub fn binomial_tolerance(target: f64, trials: usize) -> f64 {
    target + 3.0 * (target * (1.0 - target) / trials.max(1) as f64).sqrt()
}

/// Aggregate view of an oracle-trial run, written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub m: usize,
    pub n: usize,
    pub truth_rank: usize,
    pub loss: String,
    pub seed: u64,
    pub trials: usize,
    pub converged: usize,
    pub non_converged: usize,
    pub certified: usize,
    pub apriori_ok: usize,
    pub a: f64,
    pub l_a: f64,
    pub tau_a: f64,
    pub q: f64,
    pub beta: f64,
    pub delta: Option<RademacherStats>,
    pub epsilon_threshold: Option<f64>,
    pub epsilon: f64,
    pub t: f64,
    pub constants: ConstantsConfig,
    /// `e^{−t}`.
    pub target_frequency: f64,
    /// `e^{−t}` plus three binomial standard deviations.
    pub tolerance_frequency: f64,
    pub violations: usize,
    /// Over converged trials, at the configured `C`.
    pub violation_frequency: f64,
    pub calibrated_c: f64,
    pub violation_frequency_at_calibrated_c: f64,
    /// Calibrated `C` if the min term were dropped from the bound, i.e.
    /// the residual term alone had to cover `lhs − E(f_S)`.
    pub calibrated_c_residual_only: f64,
    /// Trials where the rank term is the smaller of the two.
    pub rank_regime_trials: usize,
    /// Quantiles of `lhs − E(f_S)` over converged trials.
    pub excess_gap: Option<Quantiles>,
    pub lhs: Option<Quantiles>,
    pub mean_min_term: f64,
    pub mean_residual_term: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = values.fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    if k == 0 {
        0.0
    } else {
        s / k as f64
    }
}

/// Summarizes `records` produced at `epsilon` from `setup`.
pub fn summarize(setup: &Setup, epsilon: f64, records: &[TrialRecord]) -> Result<SummaryReport> {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
    let required: Vec<f64> = ok.iter().map(|r| r.required_c).collect();
    let t = setup.config.bound.t;
    let target = (-t).exp();
    let calibrated_c = calibrate_c(&required, target);
    let c = setup.constants().c;
    let residual_only: Vec<f64> = ok
        .iter()
        .map(|r| ((r.lhs - r.oracle_excess).max(0.0)) / (r.residual_term / c))
        .collect();
    let violations = ok.iter().filter(|r| r.violated).count();
    let gaps: Vec<f64> = ok.iter().map(|r| r.lhs - r.oracle_excess).collect();
    let lhs: Vec<f64> = ok.iter().map(|r| r.lhs).collect();
    Ok(SummaryReport {
        m: setup.design.dim(),
        n: setup.config.experiment.n,
        truth_rank: setup.config.truth.rank,
        loss: setup.config.loss.name.clone(),
        seed: setup.config.experiment.seed,
        trials: records.len(),
        converged: ok.len(),
        non_converged: records.len() - ok.len(),
        certified: records.iter().filter(|r| r.certified).count(),
        apriori_ok: records.iter().filter(|r| r.apriori_ok).count(),
        a: setup.a,
        l_a: setup.loss_constants.l_a,
        tau_a: setup.loss_constants.tau_a,
        q: setup.q,
        beta: beta_uniform_basis(&setup.design)?,
        delta: setup.delta,
        epsilon_threshold: setup.epsilon_threshold,
        epsilon,
        t,
        constants: *setup.constants(),
        target_frequency: target,
        tolerance_frequency: binomial_tolerance(target, ok.len()),
        violations,
        violation_frequency: if ok.is_empty() {
            0.0
        } else {
            violations as f64 / ok.len() as f64
        },
        calibrated_c,
        violation_frequency_at_calibrated_c: violation_frequency_at(&required, calibrated_c),
        calibrated_c_residual_only: calibrate_c(&residual_only, target),
        rank_regime_trials: ok.iter().filter(|r| r.rank_term < r.nuclear_term).count(),
        excess_gap: Quantiles::of(&gaps),
        lhs: Quantiles::of(&lhs),
        mean_min_term: mean(ok.iter().map(|r| r.min_term)),
        mean_residual_term: mean(ok.iter().map(|r| r.residual_term)),
    })
}

/// `(C, violation frequency)` on a log grid around the required values.
pub fn violation_curve(records: &[TrialRecord]) -> Vec<(f64, f64)> {
    let required: Vec<f64> = records
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.required_c)
        .collect();
    if required.is_empty() {
        return Vec::new();
    }
    let top = required.iter().cloned().fold(0.0, f64::max);
    let (lo, hi) = if top > 0.0 {
        (top * 1e-3, top * 10.0)
    } else {
        (1e-3, 1e3)
    };
    let points = 40;
    (0..points)
        .map(|k| {
            let c = lo * (hi / lo).powf(k as f64 / (points - 1) as f64);
            (c, violation_frequency_at(&required, c))
        })
        .collect()
}

/// Records, summary and per-trial estimates of a verification run.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub records: Vec<TrialRecord>,
    pub summary: SummaryReport,
    pub estimates: Vec<SymmetricMatrix>,
}

/// Runs `config.experiment.trials` independent trials with oracle `S★`.
pub fn run_oracle_trials(config: &ExperimentConfig, options: &RunOptions) -> Result<OracleRun> {
    options.install(|| {
        let setup = Setup::resolve(config)?;
        let outcomes = run_trials(&setup, setup.epsilon, &setup.truth.s_star)?;
        let (records, estimates): (Vec<_>, Vec<_>) =
            outcomes.into_iter().map(|o| (o.record, o.s_hat)).unzip();
        let summary = summarize(&setup, setup.epsilon, &records)?;
        log::info!(
            "{} trials: {} violations at C={}, calibrated C={:.4e}",
            summary.trials,
            summary.violations,
            summary.constants.c,
            summary.calibrated_c
        );
        Ok(OracleRun {
            records,
            summary,
            estimates,
        })
    })?
}

/// Least-squares line `y = intercept + slope·x` with the slope's standard
/// error (0 when there are no residual degrees of freedom).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub trials: usize,
    pub converged: usize,
    /// Mean of `lhs − E(f_S★)` over converged trials.
    pub mean_error: f64,
    pub stderr: f64,
    pub mean_rank_term: f64,
    pub mean_nuclear_term: f64,
    pub mean_min_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSweep {
    pub epsilon: f64,
    pub rows: Vec<RankRow>,
    /// Mean error against rank.
    pub fit: Option<LinearFit>,
    /// `log(mean error)` against `log(rank)`, positive ranks only.
    pub loglog_fit: Option<LinearFit>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (0.0, 0.0);
    }
    let m = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64;
    (m, (var / k as f64).sqrt())
}

/// Fixed `ε` (resolved once from `config`), truth rank varied over `ranks`
/// with unit spectra sharing eigenvectors.
pub fn rank_sweep(
    config: &ExperimentConfig,
    ranks: &[usize],
    options: &RunOptions,
) -> Result<RankSweep> {
    options.install(|| {
        let base = Setup::resolve(config)?;
        let epsilon = base.epsilon;
        let mut rows = Vec::with_capacity(ranks.len());
        for &rank in ranks {
            let mut c = config.with_rank(rank);
            c.epsilon = EpsilonRule::Absolute { value: epsilon };
            let setup = Setup::resolve(&c)?;
            let outcomes = run_trials(&setup, epsilon, &setup.truth.s_star)?;
            let ok: Vec<&TrialRecord> = outcomes
                .iter()
                .map(|o| &o.record)
                .filter(|r| r.converged)
                .collect();
            let errors: Vec<f64> = ok.iter().map(|r| r.lhs - r.oracle_excess).collect();
            let (mean_error, stderr) = mean_and_stderr(&errors);
            log::info!("rank {rank}: mean error {mean_error:.4e} ± {stderr:.1e}");
            rows.push(RankRow {
                rank,
                trials: outcomes.len(),
                converged: ok.len(),
                mean_error,
                stderr,
                mean_rank_term: mean(ok.iter().map(|r| r.rank_term)),
                mean_nuclear_term: mean(ok.iter().map(|r| r.nuclear_term)),
                mean_min_term: mean(ok.iter().map(|r| r.min_term)),
            });
        }
        let x: Vec<f64> = rows.iter().map(|r| r.rank as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
        let positive: Vec<&RankRow> = rows
            .iter()
            .filter(|r| r.rank > 0 && r.mean_error > 0.0)
            .collect();
        let lx: Vec<f64> = positive.iter().map(|r| (r.rank as f64).ln()).collect();
        let ly: Vec<f64> = positive.iter().map(|r| r.mean_error.ln()).collect();
        Ok(RankSweep {
            epsilon,
            fit: linear_fit(&x, &y),
            loglog_fit: linear_fit(&lx, &ly),
            rows,
        })
    })?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub multiple: f64,
    pub epsilon: f64,
    pub converged: usize,
    pub mean_error: f64,
    pub stderr: f64,
    pub violation_frequency: f64,
    pub mean_rank_term: f64,
    pub mean_min_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub base_epsilon: f64,
    pub rows: Vec<EpsilonRow>,
}

/// Same truth and data streams, `ε = multiple · base ε`.
pub fn epsilon_sweep(
    config: &ExperimentConfig,
    multiples: &[f64],
    options: &RunOptions,
) -> Result<EpsilonSweep> {
    options.install(|| {
        let setup = Setup::resolve(config)?;
        let mut rows = Vec::with_capacity(multiples.len());
        for &multiple in multiples {
            if !(multiple > 0.0) {
                return Err(Error::input("epsilon multiples must be positive"));
            }
            let epsilon = multiple * setup.epsilon;
            let outcomes = run_trials(&setup, epsilon, &setup.truth.s_star)?;
            let ok: Vec<&TrialRecord> = outcomes
                .iter()
                .map(|o| &o.record)
                .filter(|r| r.converged)
                .collect();
            let errors: Vec<f64> = ok.iter().map(|r| r.lhs - r.oracle_excess).collect();
            let (mean_error, stderr) = mean_and_stderr(&errors);
            rows.push(EpsilonRow {
                multiple,
                epsilon,
                converged: ok.len(),
                mean_error,
                stderr,
                violation_frequency: if ok.is_empty() {
                    0.0
                } else {
                    ok.iter().filter(|r| r.violated).count() as f64 / ok.len() as f64
                },
                mean_rank_term: mean(ok.iter().map(|r| r.rank_term)),
                mean_min_term: mean(ok.iter().map(|r| r.min_term)),
            });
        }
        Ok(EpsilonSweep {
            base_epsilon: setup.epsilon,
            rows,
        })
    })?
}

/// A labeled comparison matrix for the sharpness experiment.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub label: String,
    pub matrix: SymmetricMatrix,
}

impl Oracle {
    pub fn new(label: impl Into<String>, matrix: SymmetricMatrix) -> Self {
        Self {
            label: label.into(),
            matrix,
        }
    }
}

/// Best rank-`k` approximation: keep the `k` eigenvalues largest in
/// absolute value.
pub fn best_rank_approximation(s: &SymmetricMatrix, k: usize) -> Result<SymmetricMatrix> {
    let eig = s.spectral_decompose()?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()));
    let keep: Vec<usize> = order.into_iter().take(k).collect();
    let values: Vec<f64> = (0..eig.eigenvalues.len())
        .map(|i| if keep.contains(&i) { eig.eigenvalues[i] } else { 0.0 })
        .collect();
    Ok(SymmetricMatrix::from_eigen(&eig.eigenvectors, &values))
}

/// Nearest point of `D` in Frobenius norm.
pub fn project_onto(constraint: &ConstraintSet, s: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    Ok(match *constraint {
        ConstraintSet::Unconstrained => s.clone(),
        ConstraintSet::OperatorNormBall(r) => s.spectral_decompose()?.map_eigenvalues(|v| v.clamp(-r, r)),
        ConstraintSet::FrobeniusBall(r) => {
            let f = s.frobenius_norm();
            if f <= r {
                s.clone()
            } else {
                s.scale(r / f)
            }
        }
    })
}

/// `S★`, `0`, best rank-`k` approximations of `S★` for `k < rank(S★)`, and
/// the projection of `S★` onto `D` when it differs from `S★`.
pub fn default_oracles(setup: &Setup) -> Result<Vec<Oracle>> {
    let s = &setup.truth.s_star;
    let mut out = vec![
        Oracle::new("truth", s.clone()),
        Oracle::new("zero", SymmetricMatrix::zeros(s.dim())),
    ];
    let r = s.rank(s.default_zero_tol());
    for k in 1..r {
        out.push(Oracle::new(format!("best-rank-{k}"), best_rank_approximation(s, k)?));
    }
    let projected = project_onto(setup.constraint(), s)?;
    if (&projected - s).frobenius_norm() > 1e-12 {
        out.push(Oracle::new("projected-truth", projected));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub label: String,
    pub rank: usize,
    pub oracle_excess: f64,
    /// Mean of `lhs − E(f_S)`.
    pub mean_gap: f64,
    /// Mean of `min_term + residual_term`.
    pub mean_allowance: f64,
    pub max_lhs_minus_rhs: f64,
    pub violations: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessTable {
    pub epsilon: f64,
    pub rows: Vec<SharpnessRow>,
    /// Max over oracles and trials of `lhs − rhs`.
    pub headline: f64,
}

/// Scores one set of estimates against every oracle. The last row uses the
/// first trial's estimate as the oracle.
pub fn sharpness_experiment(
    config: &ExperimentConfig,
    oracles: Option<&[Oracle]>,
    options: &RunOptions,
) -> Result<SharpnessTable> {
    options.install(|| {
        let setup = Setup::resolve(config)?;
        let eps = setup.epsilon;
        let outcomes = run_trials(&setup, eps, &setup.truth.s_star)?;
        let mut list = match oracles {
            Some(o) => o.to_vec(),
            None => default_oracles(&setup)?,
        };
        list.push(Oracle::new("first-estimate", outcomes[0].s_hat.clone()));
        let ctx = setup.bound_context(eps);
        let mut rows = Vec::with_capacity(list.len());
        for oracle in &list {
            let reports: Vec<BoundReport> = outcomes
                .iter()
                .filter(|o| o.record.converged)
                .map(|o| ctx.assemble(&oracle.matrix, o.record.lhs))
                .collect::<Result<_>>()?;
            let Some(first) = reports.first() else {
                continue;
            };
            rows.push(SharpnessRow {
                label: oracle.label.clone(),
                rank: first.oracle_rank,
                oracle_excess: first.oracle_excess,
                mean_gap: mean(reports.iter().map(|r| r.lhs - r.oracle_excess)),
                mean_allowance: mean(reports.iter().map(|r| r.min_term + r.residual_term)),
                max_lhs_minus_rhs: reports
                    .iter()
                    .map(|r| r.lhs - r.rhs)
                    .fold(f64::NEG_INFINITY, f64::max),
                violations: reports.iter().filter(|r| r.violated).count(),
                trials: reports.len(),
            });
        }
        let headline = rows
            .iter()
            .map(|r| r.max_lhs_minus_rhs)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(SharpnessTable {
            epsilon: eps,
            rows,
            headline,
        })
    })?
}

/// Two-column series for the plot-data files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotData {
    pub violation_vs_c: Vec<(f64, f64)>,
    pub error_vs_rank: Vec<(f64, f64)>,
    pub error_vs_eps: Vec<(f64, f64)>,
}

impl PlotData {
    pub fn from_rank_sweep(sweep: &RankSweep) -> Vec<(f64, f64)> {
        sweep.rows.iter().map(|r| (r.rank as f64, r.mean_error)).collect()
    }

    pub fn from_epsilon_sweep(sweep: &EpsilonSweep) -> Vec<(f64, f64)> {
        sweep.rows.iter().map(|r| (r.epsilon, r.mean_error)).collect()
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `value` as pretty JSON to `dir/name`.
pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::numerical(format!("cannot serialize {name}: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Writes a `x y` series with a comment header.
pub fn write_series(path: &Path, header: (&str, &str), series: &[(f64, f64)]) -> Result<()> {
    let mut out = format!("# {} {}\n", header.0, header.1);
    for (x, y) in series {
        out.push_str(&format!("{x:?} {y:?}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// `trials.csv` with a header row even when `records` is empty.
pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(TRIAL_COLUMNS).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(TRIAL_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "unexpected trials.csv header".into(),
        });
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

/// `trials.csv`, `timings.csv`, `summary.json` (when given) and the three
/// plot-data files.
pub fn write_outputs(
    dir: &Path,
    records: &[TrialRecord],
    summary: Option<&SummaryReport>,
    plots: &PlotData,
) -> Result<()> {
    create_dir(dir)?;
    write_trials_csv(&dir.join("trials.csv"), records)?;
    let timings = dir.join("timings.csv");
    let mut f = fs::File::create(&timings).map_err(|e| Error::io(&timings, e))?;
    writeln!(f, "trial,wall_time_s").map_err(|e| Error::io(&timings, e))?;
    for r in records {
        writeln!(f, "{},{}", r.trial, r.wall_time_s).map_err(|e| Error::io(&timings, e))?;
    }
    if let Some(s) = summary {
        write_json(dir, "summary.json", s)?;
    }
    write_plot_files(dir, plots)
}

/// `violation-vs-C.dat`, `error-vs-rank.dat`, `error-vs-eps.dat`; empty
/// series give header-only files.
pub fn write_plot_files(dir: &Path, plots: &PlotData) -> Result<()> {
    create_dir(dir)?;
    write_series(&dir.join("violation-vs-C.dat"), ("C", "violation_frequency"), &plots.violation_vs_c)?;
    write_series(&dir.join("error-vs-rank.dat"), ("rank", "mean_error"), &plots.error_vs_rank)?;
    write_series(&dir.join("error-vs-eps.dat"), ("epsilon", "mean_error"), &plots.error_vs_eps)?;
    Ok(())
}
