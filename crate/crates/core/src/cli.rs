//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (bad config, missing file,
//! dimension mismatch), 2 for numerical failure. Non-convergence is a
//! warning unless `--strict` is given. Machine-readable output only goes to
//! the `--out` directory; diagnostics go to stderr.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{ahlswede_winter_bound, estimate_delta, sigma_and_u, BoundReport, ConstantsConfig, RademacherStats};
use crate::config::ExperimentConfig;
use crate::design::sample_dataset;
use crate::error::{Error, Result};
use crate::harness::{
    epsilon_sweep, rank_sweep, run_oracle_trials, sharpness_experiment, violation_curve,
    write_json, write_outputs, write_plot_files, PlotData, RunOptions, Setup, CERTIFY_TOL,
};
use crate::loss::LossConstants;
use crate::matrix::{read_matrix_file, write_matrix_file};
use crate::seed::mix_seed;
use crate::solver::{certificate, solve, Certificate};

#[derive(Debug, Parser)]
#[command(name = "lowrank-oracle", version, about = "Nuclear-norm penalized ERM and oracle-inequality checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; nothing is written anywhere else.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Overrides the config's master seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads for trials and Monte Carlo estimates.
    #[arg(long, global = true, value_name = "N", env = "LOWRANK_ORACLE_WORKERS")]
    pub workers: Option<usize>,

    /// Treat non-convergence and failed certificates as errors.
    #[arg(long, global = true)]
    pub strict: bool,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one sampled instance (trial 0, or a dataset CSV).
    Solve {
        /// Dataset CSV (`j,atom,y`) instead of sampling.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Certify an estimate (default: solve first) against the KKT conditions.
    Certify {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Candidate matrix in text format.
        #[arg(long, value_name = "PATH")]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = CERTIFY_TOL)]
        tol: f64,
    },
    /// Estimate Δ and compare with the Ahlswede–Winter bound.
    Delta {
        /// Monte Carlo replicates (default: the config's `delta_reps`).
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Assemble the bound for trial 0 with oracle S★.
    Bound,
    /// Run all trials and calibrate C.
    Verify,
    /// Rank sweep, ε sweep and sharpness table.
    Sweep,
}

/// Maps an error to its exit code.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let config = ExperimentConfig::load(path)?;
    Ok(match cli.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn numerical_or_warn(strict: bool, msg: String) -> Result<()> {
    if strict {
        Err(Error::Numerical(msg))
    } else {
        log::warn!("{msg}");
        Ok(())
    }
}

#[derive(Serialize)]
struct SolveOutput {
    epsilon: f64,
    n: usize,
    converged: bool,
    iterations: usize,
    objective: f64,
    fixed_point_residual: f64,
    grad_tol: f64,
    rank: usize,
    nuclear_norm: f64,
    certificate: Certificate,
}

#[derive(Serialize)]
struct DeltaOutput {
    m: usize,
    n: usize,
    stats: RademacherStats,
    sigma_x: f64,
    u_x: f64,
    ahlswede_winter: f64,
    epsilon_threshold: f64,
    l_a: f64,
    constants: ConstantsConfig,
}

#[derive(Serialize)]
struct BoundOutput {
    report: BoundReport,
    epsilon: f64,
    t: f64,
    constants: ConstantsConfig,
    loss_constants: LossConstants,
    q: f64,
    n: usize,
}

#[derive(Serialize)]
struct SweepOutput {
    rank_sweep: crate::harness::RankSweep,
    epsilon_sweep: crate::harness::EpsilonSweep,
    sharpness: crate::harness::SharpnessTable,
}

fn dataset(setup: &Setup, data: Option<&Path>) -> Result<crate::design::Dataset> {
    match data {
        Some(p) => {
            let d = crate::design::Dataset::read_csv(p, &setup.design)?;
            Ok(d)
        }
        None => sample_dataset(&setup.design, &setup.truth, setup.config.experiment.n, setup.trial_seed(0)),
    }
}

/// Runs the parsed command.
pub fn dispatch(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let options = RunOptions {
        workers: cli.workers,
    };
    let out = cli.out.as_path();
    match &cli.command {
        Command::Solve { data } => {
            let setup = options.install(|| Setup::resolve(&config))??;
            let data = dataset(&setup, data.as_deref())?;
            let eps = setup.epsilon;
            let result = solve(&data, setup.loss.as_ref(), &setup.solver_config(eps), setup.constraint())?;
            let cert = certificate(&result.s_hat, &data, setup.loss.as_ref(), eps, setup.constraint())?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            write_matrix_file(out.join("s_hat.txt"), &result.s_hat)?;
            write_json(
                out,
                "solve.json",
                &SolveOutput {
                    epsilon: eps,
                    n: data.n(),
                    converged: result.converged,
                    iterations: result.iterations,
                    objective: result.objective(),
                    fixed_point_residual: result.fixed_point_residual,
                    grad_tol: result.grad_tol,
                    rank: result.s_hat.rank(result.s_hat.default_zero_tol()),
                    nuclear_norm: result.s_hat.nuclear_norm(),
                    certificate: cert,
                },
            )?;
            if !result.converged {
                numerical_or_warn(
                    cli.strict,
                    format!("solver did not converge in {} iterations", result.iterations),
                )?;
            }
            Ok(())
        }
        Command::Certify { data, matrix, tol } => {
            let setup = options.install(|| Setup::resolve(&config))??;
            let data = dataset(&setup, data.as_deref())?;
            let eps = setup.epsilon;
            let s_hat = match matrix {
                Some(p) => read_matrix_file(p)?,
                None => solve(&data, setup.loss.as_ref(), &setup.solver_config(eps), setup.constraint())?.s_hat,
            };
            if s_hat.dim() != data.dim() {
                return Err(Error::Dimension {
                    expected: data.dim(),
                    actual: s_hat.dim(),
                });
            }
            let cert = certificate(&s_hat, &data, setup.loss.as_ref(), eps, setup.constraint())?;
            write_json(out, "certificate.json", &cert)?;
            if !cert.passes(*tol) {
                numerical_or_warn(
                    cli.strict,
                    format!(
                        "certificate fails at tol {tol}: residuals {:.3e}, {:.3e}, violation {:.3e}",
                        cert.kkt.low_rank_residual, cert.kkt.spectral_excess, cert.constraint_violation
                    ),
                )?;
            }
            Ok(())
        }
        Command::Delta { reps } => {
            let setup = options.install(|| Setup::resolve(&config))??;
            let reps = reps.unwrap_or(match config.epsilon {
                crate::config::EpsilonRule::ThresholdMultiple { delta_reps, .. } => delta_reps,
                crate::config::EpsilonRule::Absolute { .. } => 500,
            });
            let n = config.experiment.n;
            let seed = mix_seed(config.experiment.seed, crate::harness::DELTA_STREAM);
            let stats = options.install(|| estimate_delta(&setup.design, n, reps, seed))??;
            let (sigma_x, u_x) = sigma_and_u(&setup.design);
            let m = setup.design.dim();
            write_json(
                out,
                "delta.json",
                &DeltaOutput {
                    m,
                    n,
                    stats,
                    sigma_x,
                    u_x,
                    ahlswede_winter: ahlswede_winter_bound(sigma_x, u_x, m, n),
                    epsilon_threshold: crate::bounds::epsilon_threshold(
                        &config.bound.constants,
                        setup.loss_constants.l_a,
                        stats.delta,
                        n,
                    ),
                    l_a: setup.loss_constants.l_a,
                    constants: config.bound.constants,
                },
            )
        }
        Command::Bound => {
            let setup = options.install(|| Setup::resolve(&config))??;
            let outcome = crate::harness::run_trial(&setup, setup.epsilon, 0, &setup.truth.s_star)?;
            let report = setup
                .bound_context(setup.epsilon)
                .assemble(&setup.truth.s_star, outcome.record.lhs)?;
            write_json(
                out,
                "bound.json",
                &BoundOutput {
                    report,
                    epsilon: setup.epsilon,
                    t: config.bound.t,
                    constants: config.bound.constants,
                    loss_constants: setup.loss_constants,
                    q: setup.q,
                    n: config.experiment.n,
                },
            )?;
            if !outcome.record.converged {
                numerical_or_warn(cli.strict, "solver did not converge on trial 0".into())?;
            }
            Ok(())
        }
        Command::Verify => {
            let run = run_oracle_trials(&config, &options)?;
            let plots = PlotData {
                violation_vs_c: violation_curve(&run.records),
                ..PlotData::default()
            };
            write_outputs(out, &run.records, Some(&run.summary), &plots)?;
            eprintln!(
                "{} trials ({} converged): violation frequency {:.4} at C={}, calibrated C={:.4e}",
                run.summary.trials,
                run.summary.converged,
                run.summary.violation_frequency,
                run.summary.constants.c,
                run.summary.calibrated_c
            );
            if run.summary.non_converged > 0 {
                numerical_or_warn(
                    cli.strict,
                    format!("{} trials did not converge", run.summary.non_converged),
                )?;
            }
            Ok(())
        }
        Command::Sweep => {
            let ranks = config.experiment.ranks.clone();
            let multiples = config.experiment.multiples.clone();
            let rs = rank_sweep(&config, &ranks, &options)?;
            let es = epsilon_sweep(&config, &multiples, &options)?;
            let sh = sharpness_experiment(&config, None, &options)?;
            let plots = PlotData {
                error_vs_rank: PlotData::from_rank_sweep(&rs),
                error_vs_eps: PlotData::from_epsilon_sweep(&es),
                ..PlotData::default()
            };
            write_plot_files(out, &plots)?;
            write_json(
                out,
                "sweep.json",
                &SweepOutput {
                    rank_sweep: rs,
                    epsilon_sweep: es,
                    sharpness: sh,
                },
            )
        }
    }
}
