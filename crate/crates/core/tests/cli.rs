use std::path::{Path, PathBuf};

use lowrank_oracle::cli::run;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"
[design]
kind = "orthonormal-basis"
m = 4

[truth]
rank = 1
noise = {{ type = "gaussian", sigma = 0.1 }}

[constraint]
type = "operator-norm-ball"
radius = 1.5

{extra}

[experiment]
n = 60
trials = 5
seed = 3
ranks = [1, 2]
multiples = [1.0, 2.0]
"#
    );
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn args<'a>(cmd: &'a str, config: &'a Path, out: &'a Path) -> Vec<String> {
    vec![
        "lowrank-oracle".into(),
        cmd.into(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ]
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn verify_with_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(args("verify", &shipped("verify.toml"), &out)), 0);
    assert_eq!(
        listing(dir.path()),
        vec!["out".to_string()],
        "nothing outside --out"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for key in [
        "trials",
        "converged",
        "non_converged",
        "violation_frequency",
        "calibrated_c",
        "epsilon",
        "epsilon_threshold",
        "constants",
        "excess_gap",
        "target_frequency",
    ] {
        assert!(summary.get(key).is_some(), "summary.json lacks {key}");
    }
    assert_eq!(summary["trials"], 200);
    for f in ["trials.csv", "timings.csv", "violation-vs-C.dat", "error-vs-rank.dat", "error-vs-eps.dat"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn every_subcommand_writes_its_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[epsilon]\nrule = \"absolute\"\nvalue = 0.05");
    for (cmd, file) in [
        ("solve", "solve.json"),
        ("certify", "certificate.json"),
        ("delta", "delta.json"),
        ("bound", "bound.json"),
        ("verify", "summary.json"),
        ("sweep", "sweep.json"),
    ] {
        let out = dir.path().join(cmd);
        let mut a = args(cmd, &cfg, &out);
        a.push("--strict".into());
        assert_eq!(run(a), 0, "{cmd}");
        assert!(out.join(file).exists(), "{cmd} → {file}");
    }
    let s_hat = dir.path().join("solve").join("s_hat.txt");
    let mut a = args("certify", &cfg, &dir.path().join("recert"));
    a.extend(["--matrix".into(), s_hat.display().to_string(), "--strict".into()]);
    assert_eq!(run(a), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(args("verify", &dir.path().join("missing.toml"), &out)), 1);

    let neg = small_config(dir.path(), "[epsilon]\nrule = \"absolute\"\nvalue = -0.5");
    assert_eq!(run(args("solve", &neg, &out)), 1);

    let capped = small_config(
        dir.path(),
        "[epsilon]\nrule = \"absolute\"\nvalue = 0.001\n\n[solver]\nmax_iters = 1",
    );
    assert_eq!(run(args("solve", &capped, &out)), 0, "non-convergence only warns");
    let mut strict = args("solve", &capped, &out);
    strict.push("--strict".into());
    assert_eq!(run(strict), 2);

    // a wrong-size candidate matrix
    let cfg = small_config(dir.path(), "");
    let m = dir.path().join("m.txt");
    std::fs::write(&m, "m 2\n1.0 0.0\n0.0 1.0\n").unwrap();
    let mut a = args("certify", &cfg, &out);
    a.extend(["--matrix".into(), m.display().to_string()]);
    assert_eq!(run(a), 1);
}

#[test]
fn seed_override_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let read = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let mut a = args("verify", &cfg, &out);
        a.extend(["--seed".into(), seed.into()]);
        assert_eq!(run(a), 0);
        std::fs::read(out.join("trials.csv")).unwrap()
    };
    let a = read("a", "11");
    let b = read("b", "11");
    let c = read("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn workers_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("env");
    std::env::set_var("LOWRANK_ORACLE_WORKERS", "2");
    assert_eq!(run(args("verify", &cfg, &out)), 0);
    std::env::set_var("LOWRANK_ORACLE_WORKERS", "0");
    assert_eq!(run(args("verify", &cfg, &dir.path().join("zero"))), 1);
    std::env::remove_var("LOWRANK_ORACLE_WORKERS");
}
