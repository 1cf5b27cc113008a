// Repeated trials at the ε threshold: violation frequency, calibrated C,
// and the output files the CLI `verify` command writes.
//
//     cargo run --release --example verify_trials [config.toml] [out-dir]

use std::path::{Path, PathBuf};

use lowrank_oracle::config::ExperimentConfig;
use lowrank_oracle::harness::{run_oracle_trials, violation_curve, write_outputs, PlotData, RunOptions};

const DEFAULT_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/verify.toml");

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run_with(DEFAULT_CONFIG, &std::env::temp_dir().join("lowrank-oracle-verify"))
}

fn run_with(path: &str, out: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::load(path)?;
    let run = run_oracle_trials(&config, &RunOptions::default())?;
    let s = &run.summary;
    println!("m={} n={} trials={} eps={:.4}", s.m, s.n, s.trials, s.epsilon);
    println!(
        "violations at C={}: {} ({:.3}), target e^-t = {:.4}",
        s.constants.c, s.violations, s.violation_frequency, s.target_frequency
    );
    println!("calibrated C = {:.4e} (residual term alone: {:.4e})", s.calibrated_c, s.calibrated_c_residual_only);
    if let Some(q) = &s.excess_gap {
        println!("E(f_Ŝ) − E(f_S): median {:.4e}, q95 {:.4e}", q.median, q.q95);
    }
    let plots = PlotData {
        violation_vs_c: violation_curve(&run.records),
        ..PlotData::default()
    };
    write_outputs(out, &run.records, Some(s), &plots)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| DEFAULT_CONFIG.into());
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lowrank-oracle-verify"));
    run_with(&path, &out).unwrap();
}
