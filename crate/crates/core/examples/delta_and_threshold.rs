// Δ by Monte Carlo against the Ahlswede–Winter bound, the resulting ε
// threshold, and β for basis designs.
//
//     cargo run --example delta_and_threshold

use lowrank_oracle::bounds::{
    ahlswede_winter_bound, beta_sample_lower, beta_uniform_basis, epsilon_threshold,
    estimate_delta, sigma_and_u, ConstantsConfig,
};
use lowrank_oracle::design::orthonormal_basis_design;
use lowrank_oracle::harness::random_truth;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let constants = ConstantsConfig::default();
    let n = 600;
    println!("{:>4} {:>10} {:>10} {:>10} {:>10} {:>8}", "m", "delta", "stderr", "AW", "eps(L=4)", "beta");
    for m in [4, 8, 12] {
        let design = orthonormal_basis_design(m)?;
        let stats = estimate_delta(&design, n, 400, 1)?;
        let (sigma, u) = sigma_and_u(&design);
        println!(
            "{m:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8.4}",
            stats.delta,
            stats.stderr,
            ahlswede_winter_bound(sigma, u, m, n),
            epsilon_threshold(&constants, 4.0, stats.delta, n),
            beta_uniform_basis(&design)?
        );
    }
    let design = orthonormal_basis_design(6)?;
    let s = random_truth(6, &[1.0, 1.0], 3)?;
    println!(
        "sampled lower bound on beta at a rank-2 S (m=6): {:.4}",
        beta_sample_lower(&s, &design, 5.0, 200, 4)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
