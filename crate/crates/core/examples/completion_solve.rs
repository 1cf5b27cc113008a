// Matrix completion over the orthonormal basis: sample noisy entries of a
// rank-2 truth, solve the penalized problem, certify the solution and
// report its excess risk.
//
//     cargo run --example completion_solve

use lowrank_oracle::design::{orthonormal_basis_design, sample_dataset, RiskModel, TruthModel};
use lowrank_oracle::harness::random_truth;
use lowrank_oracle::loss::SquaredLoss;
use lowrank_oracle::solver::{certificate, solve, ConstraintSet, SolverConfig};
use std::sync::Arc;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let m = 8;
    let design = orthonormal_basis_design(m)?;
    let truth = TruthModel::gaussian(random_truth(m, &[1.0, -1.0], 1)?, 0.1)?;
    let data = sample_dataset(&design, &truth, 400, 2)?;
    let loss = Arc::new(SquaredLoss::with_response_bound(truth.response_bound(&design)?));
    let risk = RiskModel::new(&design, &truth, loss.clone())?;
    let constraint = ConstraintSet::OperatorNormBall(1.5);

    println!("{:>8} {:>6} {:>6} {:>12} {:>12}", "eps", "iters", "rank", "excess", "kkt");
    for eps in [0.001, 0.01, 0.05, 0.2] {
        let r = solve(&data, loss.as_ref(), &SolverConfig::with_epsilon(eps), &constraint)?;
        let cert = certificate(&r.s_hat, &data, loss.as_ref(), eps, &constraint)?;
        println!(
            "{eps:>8} {:>6} {:>6} {:>12.4e} {:>12.2e}{}",
            r.iterations,
            r.s_hat.rank(r.s_hat.default_zero_tol()),
            risk.excess_risk(&r.s_hat)?,
            cert.kkt.max(),
            if r.converged { "" } else { "  (not converged)" }
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
