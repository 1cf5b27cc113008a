macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(spectral_tools, "spectral_tools.rs");
example!(loss_constants, "loss_constants.rs");
example!(completion_solve, "completion_solve.rs");
example!(delta_and_threshold, "delta_and_threshold.rs");
example!(oracle_bound, "oracle_bound.rs");

#[test]
fn spectral_tools_runs() {
    spectral_tools::run_example().unwrap();
}

#[test]
fn loss_constants_runs() {
    loss_constants::run_example().unwrap();
}

#[test]
fn completion_solve_runs() {
    completion_solve::run_example().unwrap();
}

#[test]
fn delta_and_threshold_runs() {
    delta_and_threshold::run_example().unwrap();
}

#[test]
fn oracle_bound_runs() {
    oracle_bound::run_example().unwrap();
}
