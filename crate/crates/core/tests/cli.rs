use std::path::Path;
use std::process::Command;

use lkreg::cli::{parse_config_str, read_pgm, read_trace_csv, run_experiment, Preset};
use lkreg::solver::StopReason;

fn lkreg() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lkreg"));
    c.env("RUST_LOG", "error");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_writes_artifacts_and_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "pat.cfg", "preset = PAT\ngrid = 32\nmeasurements = 10\nmax_sweeps = 50\n");
    let out = dir.path().join("out");
    let status = lkreg()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--grid", "20", "--max-sweeps", "3", "--seed", "9"])
        .status()
        .unwrap();
    assert!(status.success());

    let (w, h, px) = read_pgm(&out.join("recon.pgm")).unwrap();
    assert_eq!((w, h, px.len()), (20, 20, 400));
    let rows = read_trace_csv(&out.join("trace.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 10);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    for line in ["grid = 20", "max_sweeps = 3", "seed = 9", "stop_reason = budget-exhausted"] {
        assert!(report.lines().any(|l| l == line), "missing '{line}' in\n{report}");
    }
}

#[test]
fn several_configs_run_in_parallel_into_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.cfg", "preset = Schlieren\ngrid = 16\nmeasurements = 4\nmax_sweeps = 2\n");
    let b = write(dir.path(), "b.cfg", "preset = EllipticID\ngrid = 16\nmax_sweeps = 2\n");
    let out = dir.path().join("runs");
    let status = lkreg()
        .args(["solve", "--jobs", "2", "--config"])
        .arg(&a)
        .arg("--config")
        .arg(&b)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for stem in ["a", "b"] {
        assert!(out.join(stem).join("trace.csv").exists(), "{stem}");
    }
}

#[test]
fn bad_config_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "preset = PAT\n\nfrobnicate = 3\n");
    let out = lkreg().args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn same_seed_same_trace_different_seed_different_data() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: u64, name: &str| {
        let mut spec = parse_config_str("preset = PAT\ngrid = 20\nmeasurements = 6\nmax_sweeps = 4\n").unwrap();
        spec.seed = seed;
        spec.out = dir.path().join(name);
        run_experiment(&spec).unwrap();
        std::fs::read(spec.out.join("trace.csv")).unwrap()
    };
    let a = run(1, "a");
    assert_eq!(a, run(1, "b"));
    assert_ne!(a, run(2, "c"));
}

#[test]
fn elliptic_desk_run_reaches_discrepancy_and_bregman_decreases() {
    let dir = tempfile::tempdir().unwrap();
    // The preset noise level needs far more sweeps than a unit test allows.
    let mut spec = parse_config_str("preset = EllipticID\ngrid = 24\ndelta = 0.001\nmax_sweeps = 4000\n").unwrap();
    assert_eq!(spec.preset, Preset::EllipticId);
    spec.out = dir.path().join("ell");
    let rep = run_experiment(&spec).unwrap();
    assert_eq!(rep.result.stop_reason, StopReason::AllSkipped);

    let rows = read_trace_csv(&spec.out.join("trace.csv")).unwrap();
    let last = rows.last().unwrap();
    assert!(last.skipped && last.residual <= spec.tau * rep.delta);
    let breg: Vec<f64> = rows.iter().map(|r| r.bregman.unwrap()).collect();
    assert!(breg.last().unwrap() < breg.first().unwrap());
}
