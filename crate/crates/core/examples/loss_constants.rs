// L(a), τ(a) and Q for the built-in losses, grid against closed form,
// plus the second-order lower bound on random triples.
//
//     cargo run --example loss_constants

use lowrank_oracle::loss::{
    curvature_samples, exponential_loss, grid_constants, loss_constants,
    second_order_lower_bound_check, squared_loss, DEFAULT_GRID_SIZE,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>12} {:>5} {:>12} {:>12} {:>10}", "loss", "a", "L(a)", "tau(a)", "Q");
    for loss in [squared_loss(), exponential_loss()] {
        for a in [0.5, 1.0, 2.5] {
            let c = loss_constants(loss.as_ref(), a, DEFAULT_GRID_SIZE)?;
            let g = grid_constants(loss.as_ref(), a, 2_001)?;
            println!(
                "{:>12} {a:>5} {:>12.6} {:>12.6} {:>10.4}   (coarse grid {:.6}, {:.6})",
                loss.name(),
                c.l_a,
                c.tau_a,
                loss.q(a),
                g.l_a,
                g.tau_a
            );
        }
    }
    let ex = exponential_loss();
    let samples = curvature_samples(ex.as_ref(), 1.0, 1_000, 7);
    println!(
        "exponential second-order bound on 1000 samples: {}",
        second_order_lower_bound_check(ex.as_ref(), 1.0, &samples)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
