use std::fs;
use std::io::BufReader;

use spinflow_core::flow::FlowTrace;
use spinflow_lab::experiment::{read_snapshots, Manifest};
use spinflow_lab::{parse_config, run_experiment_in, ExperimentError};

const SHORT: &str = include_str!("../../../golden/short.ini");
const SHORT_TRACE: &str = include_str!("../../../golden/short_trace.txt");

#[test]
fn flat_constant_run_is_already_critical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config("[grid]\nn = 8\n[flow]\nt_end = 1\n").unwrap();
    let summary = run_experiment_in(&cfg, dir.path()).unwrap();
    assert_eq!(summary.trace.rows[0].energy, 0.0);
    assert!(summary.trace.rows.iter().all(|r| r.energy == 0.0));
    assert_eq!(summary.report.get("status"), Some("already critical"));
    let manifest = Manifest::read(dir.path()).unwrap();
    assert_eq!(manifest.fields["status"], "ok");
}

#[test]
fn short_run_matches_the_pinned_trace() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment_in(&parse_config(SHORT).unwrap(), dir.path()).unwrap();
    let pinned = FlowTrace::read(BufReader::new(SHORT_TRACE.as_bytes())).unwrap();
    assert_eq!(summary.trace.len(), pinned.len());
    for (a, b) in summary.trace.rows.iter().zip(&pinned.rows) {
        assert!((a.t - b.t).abs() <= 1e-12 * b.t.max(1e-3));
        assert!((a.energy - b.energy).abs() <= 1e-10 * b.energy, "{} vs {}", a.energy, b.energy);
        assert!((a.q_l2 - b.q_l2).abs() <= 1e-10 * b.q_l2);
    }
}

#[test]
fn run_directory_is_complete_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = parse_config(SHORT).unwrap();
    let first = run_experiment_in(&cfg, a.path()).unwrap();
    let second = run_experiment_in(&cfg, b.path()).unwrap();
    for name in ["trace.txt", "report.txt", "snapshots/index.txt"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    assert_eq!(first.final_state, second.final_state);

    let manifest = Manifest::read(a.path()).unwrap();
    assert_eq!(manifest.config().unwrap(), cfg);
    assert_eq!(manifest.fields["initial_checksum"].len(), 64);

    let snaps = read_snapshots(a.path()).unwrap();
    assert_eq!(snaps.len(), 2);
    assert_eq!(snaps[0].0, 0.0);
    assert_eq!(snaps[1].1, first.final_state);
}

#[test]
fn spinor_runs_report_the_energy_identity() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment_in(&parse_config(SHORT).unwrap(), dir.path()).unwrap();
    let defect: f64 = summary.report.get("energy_identity_defect").unwrap().parse().unwrap();
    let dissipation: f64 = summary.report.get("dissipation").unwrap().parse().unwrap();
    let drop = summary.trace.rows[0].energy - summary.trace.last().unwrap().energy;
    assert!(drop > 0.0);
    assert!(defect <= 1e-6 * drop, "defect {defect} for a drop of {drop}");
    // The trapezoid over the trace is a coarser estimate of the same integral.
    let rows = summary.trace.len();
    assert!((summary.trace.dissipation(0, rows - 1) - dissipation).abs() < 1e-2 * dissipation);
}

#[test]
fn existing_run_is_not_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config("[grid]\nn = 8\n").unwrap();
    run_experiment_in(&cfg, dir.path()).unwrap();
    let before = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(matches!(run_experiment_in(&cfg, dir.path()), Err(ExperimentError::Exists(_))));
    assert_eq!(fs::read_to_string(dir.path().join("manifest.txt")).unwrap(), before);
}

#[test]
fn failures_are_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config("[grid]\nn = 8\n[init]\nrecipe = random_smooth\namplitude = 5\n").unwrap();
    assert!(matches!(run_experiment_in(&cfg, dir.path()), Err(ExperimentError::Synth(_))));
    let manifest = Manifest::read(dir.path()).unwrap();
    assert_eq!(manifest.fields["status"], "failed");
    assert!(manifest.fields["error"].contains("positive definite"));
}

#[test]
fn reconstruction_compares_gauged_and_spinor_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(
        "[grid]\nn = 8\n[flow]\nkind = gauged\nt_end = 0.02\n[init]\nrecipe = random_smooth\namplitude = 0.02\n\
         [gauge]\nreconstruct = true\ncompare_every = 0.01\n",
    )
    .unwrap();
    let summary = run_experiment_in(&cfg, dir.path()).unwrap();
    let d: f64 = summary.report.get("gauge_discrepancy_max").unwrap().parse().unwrap();
    assert!(d < 1e-3, "{d}");
    let rows = fs::read_to_string(dir.path().join("gauge.txt")).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 2);
}
