// Error against truth rank at fixed ε, and against ε at fixed rank.
//
//     cargo run --release --example rank_sweep [config.toml]

use lowrank_oracle::config::ExperimentConfig;
use lowrank_oracle::harness::{epsilon_sweep, rank_sweep, RunOptions};

const DEFAULT_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/rank-sweep.toml");

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_with(DEFAULT_CONFIG)
}

fn run_with(path: &str) -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::load(&path)?;
    config.experiment.trials = config.experiment.trials.min(50);
    let opts = RunOptions::default();

    let rs = rank_sweep(&config, &config.experiment.ranks, &opts)?;
    println!("eps = {}", rs.epsilon);
    for r in &rs.rows {
        println!(
            "rank {:>2}: error {:.4e} ± {:.1e}   rank term {:.4e}",
            r.rank, r.mean_error, r.stderr, r.mean_rank_term
        );
    }
    if let Some(f) = rs.loglog_fit {
        println!("log-log exponent {:.3} ± {:.3}", f.slope, 2.0 * f.slope_stderr);
    }

    let es = epsilon_sweep(&config, &config.experiment.multiples, &opts)?;
    for r in &es.rows {
        println!(
            "eps {:>8.4}: error {:.4e}   min term {:.4e}",
            r.epsilon, r.mean_error, r.mean_min_term
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| DEFAULT_CONFIG.into());
    run_with(&path).unwrap();
}
