// Every term of the oracle inequality for one dataset, at several oracles
// including a misspecified one outside the constraint set.
//
//     cargo run --example oracle_bound [path/to/config.toml]

use lowrank_oracle::config::ExperimentConfig;
use lowrank_oracle::harness::{best_rank_approximation, run_trial, Setup};
use lowrank_oracle::matrix::SymmetricMatrix;

const DEFAULT_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/rank-sweep.toml");

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_with(DEFAULT_CONFIG)
}

fn run_with(path: &str) -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::load(&path)?;
    config.truth.rank = 3;
    config.truth.spectrum = Some(vec![2.0, 1.0, 0.3]);
    let setup = Setup::resolve(&config)?;
    let eps = setup.epsilon;
    let trial = run_trial(&setup, eps, 0, &setup.truth.s_star)?;
    println!("eps = {eps}, E(f_Ŝ) = {:.4e}", trial.record.lhs);

    let s = &setup.truth.s_star;
    let oracles = [
        ("truth (outside D)", s.clone()),
        ("best rank 1", best_rank_approximation(s, 1)?),
        ("best rank 2", best_rank_approximation(s, 2)?),
        ("zero", SymmetricMatrix::zeros(s.dim())),
    ];
    let ctx = setup.bound_context(eps);
    println!(
        "{:>18} {:>10} {:>10} {:>10} {:>10} {:>10} {:>6}",
        "oracle", "E(f_S)", "rank", "nuclear", "residual", "rhs", "viol"
    );
    for (label, o) in &oracles {
        let r = ctx.assemble(o, trial.record.lhs)?;
        println!(
            "{label:>18} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>6}",
            r.oracle_excess, r.rank_term, r.nuclear_term, r.residual_term, r.rhs, r.violated
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| DEFAULT_CONFIG.into());
    run_with(&path).unwrap();
}
