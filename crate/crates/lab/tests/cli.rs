use std::fs;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spinflow");

fn spinflow(args: &[&str], root: &std::path::Path) -> Output {
    Command::new(BIN).args(args).env("SPINFLOW_OUTPUT_ROOT", root).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_then_analyze_then_reconstruct() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("run.ini");
    fs::write(
        &config,
        "[grid]\nn = 8\n[flow]\nkind = gauged\nt_end = 0.005\n[init]\nrecipe = random_smooth\namplitude = 0.02\n\
         [output]\ndir = out\nsnapshot_every = 5\n",
    )
    .unwrap();
    let run = spinflow(&["run", config.to_str().unwrap()], root.path());
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let out = root.path().join("out");
    assert!(stdout(&run).contains("flow = gauged"));
    assert!(stdout(&run).contains("energy_initial"));

    let analyze = spinflow(&["analyze", out.join("trace.txt").to_str().unwrap(), "--e-limit", "0"], root.path());
    assert_eq!(analyze.status.code(), Some(0));
    assert!(stdout(&analyze).contains("e_limit_source = given"));

    let rec = spinflow(&["reconstruct", out.to_str().unwrap()], root.path());
    assert_eq!(rec.status.code(), Some(0), "{}", String::from_utf8_lossy(&rec.stderr));
    assert!(stdout(&rec).contains("displacement_max"));
    assert!(out.join("reconstructed/snap_00000.spfl").exists());
}

#[test]
fn invalid_configuration_exits_with_two() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("bad.ini");
    fs::write(&config, "[grid]\nn = 12\n[flow]\nrel_tol = 1\n").unwrap();
    let out = spinflow(&["run", config.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("line 4"), "{err}");
}

#[test]
fn missing_configuration_exits_with_two() {
    let root = tempfile::tempdir().unwrap();
    let out = spinflow(&["run", root.path().join("absent.ini").to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_three() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("big.ini");
    fs::write(&config, "[grid]\nn = 8\n[init]\nrecipe = random_smooth\namplitude = 5\n[output]\ndir = out\n").unwrap();
    let out = spinflow(&["run", config.to_str().unwrap()], root.path());
    assert_eq!(out.status.code(), Some(3));
    let missing = spinflow(&["analyze", root.path().join("none.txt").to_str().unwrap()], root.path());
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn check_suite_exits_with_zero() {
    let root = tempfile::tempdir().unwrap();
    let out = spinflow(&["check", "algebra"], root.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("# suite algebra"));
    assert!(text.contains("clifford_relation pass"));
}

#[test]
fn project_slice_writes_a_snapshot() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("r.ini");
    fs::write(
        &config,
        "[grid]\nn = 8\n[flow]\nt_end = 1e-4\n[init]\nrecipe = random_smooth\namplitude = 0.01\ncutoff = 1\n\
         [output]\ndir = out\n",
    )
    .unwrap();
    let flat = root.path().join("flat.ini");
    fs::write(&flat, "[grid]\nn = 8\n[output]\ndir = flat\n").unwrap();
    for c in [&config, &flat] {
        assert_eq!(spinflow(&["run", c.to_str().unwrap()], root.path()).status.code(), Some(0));
    }
    let snap = root.path().join("out/snapshots/snap_00000.spfl");
    let reference = root.path().join("flat/snapshots/snap_00000.spfl");
    let projected = root.path().join("p.spfl");
    let out = spinflow(
        &["project-slice", snap.to_str().unwrap(), reference.to_str().unwrap(), "--output", projected.to_str().unwrap()],
        root.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("iteration 0 residual"));
    assert!(projected.exists());
}
