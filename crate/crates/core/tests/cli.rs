//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_viscomem");

fn run(sub: &str, config: &str, out: &Path, seed: u64) -> (i32, String) {
    let dir = out.parent().unwrap();
    let cfg = dir.join(format!("{sub}-{seed}.conf"));
    fs::write(&cfg, config).unwrap();
    let o = Command::new(BIN)
        .args([sub, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .args(["--seed", &seed.to_string()])
        .output()
        .unwrap();
    (
        o.status.code().unwrap(),
        String::from_utf8(o.stdout).unwrap(),
    )
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

const TRANSIENT: &str = "[grid]\nnx = 12\nny = 12\n[fluid]\nt_end = 0.2\ninitial = random_smooth\n";

#[test]
fn kernel_check_passes_and_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("k");
    let (code, stdout) = run("kernel-check", "[kernel]\nn = 64\ntrials = 50\n", &out, 3);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("overall = PASS"));
    assert_eq!(
        listing(&out),
        ["config.txt", "soe_modes.csv", "summary.txt", "weights.csv"]
    );
    let weights = fs::read_to_string(out.join("weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 65);
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("kind = kernel-check\nseed = 3\n"));
}

#[test]
fn transient_outputs_are_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    assert_eq!(run("run-transient", TRANSIENT, &a, 5).0, 0);
    assert_eq!(run("run-transient", TRANSIENT, &b, 5).0, 0);
    assert_eq!(run("run-transient", TRANSIENT, &c, 6).0, 0);
    assert_eq!(
        listing(&a),
        [
            "config.txt",
            "diagnostics.csv",
            "pressure.csv",
            "summary.txt",
            "velocity.csv"
        ]
    );
    for f in listing(&a) {
        assert_eq!(
            fs::read(a.join(&f)).unwrap(),
            fs::read(b.join(&f)).unwrap(),
            "{f}"
        );
    }
    assert_ne!(
        fs::read(a.join("diagnostics.csv")).unwrap(),
        fs::read(c.join("diagnostics.csv")).unwrap()
    );
}

#[test]
fn binary_snapshots_are_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("s");
    let cfg = "[grid]\nnx = 12\nny = 12\n[output]\nsnapshot_format = binary\n";
    assert_eq!(run("solve-steady", cfg, &out, 1).0, 0);
    let (header, u) = viscomem::snapshot::read_velocity(&out.join("velocity.bin")).unwrap();
    assert_eq!(header.grid.nx, 12);
    assert!(u.l2() > 0.0);
    assert!(out.join("steady_summary.txt").exists());
}

#[test]
fn invalid_config_exits_2_with_only_an_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let (code, _) = run("run-transient", "[kernel]\nbeta = 1.2\n", &out, 1);
    assert_eq!(code, 2);
    assert_eq!(listing(&out), ["error.txt"]);
    let record = fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(record.contains("class = validation\n"));
    assert!(record.contains("key = kernel.beta\n"));
    assert!(record.contains("beta must lie in [0,1)"));

    let out = tmp.path().join("unknown");
    let (code, _) = run("run-transient", "[fluid]\nviscosity = 1\n", &out, 1);
    assert_eq!(code, 2);
    let record = fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(record.contains("line = 2\n"), "{record}");
}

#[test]
fn kind_mismatch_and_usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let (code, _) = run(
        "solve-steady",
        "[experiment]\nkind = decay-study\n",
        &out,
        1,
    );
    assert_eq!(code, 2);
    let status = Command::new(BIN)
        .args(["solve-steady", "--config", "x.conf"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(BIN)
        .args(["solve-steady", "--config", "/nonexistent/x.conf", "--out"])
        .arg(tmp.path().join("n"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn failed_check_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let cfg = "[analysis]\nrefine = steady_space\nbase_n = 8\nexpected_order = 4\n";
    let (code, stdout) = run("convergence-study", cfg, &out, 1);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("FAIL steady_space_order"));
    assert!(out.join("convergence.csv").exists());
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("n");
    let cfg = "[grid]\nnx = 12\nny = 12\n[forcing]\nfbar_amplitude = 5\n[steady]\nmax_iters = 1\ntol = 1e-13\n";
    let (code, _) = run("solve-steady", cfg, &out, 1);
    assert_eq!(code, 3);
    let record = fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(record.contains("class = iteration\n"));
    assert!(record.contains("residual_0 = "));
}
