//! Experiment orchestration and on-disk artifacts.
//!
//! A run directory holds `manifest.txt`, `trace.txt`, `report.txt`,
//! `snapshots/` with an `index.txt`, and optionally `checks.txt` and
//! `gauge.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Matrix3;
use spinflow_core::analysis::{
    dissipation_tail, estimate_energy_limit, estimate_theta, fit_decay, fit_energy_decay, fit_gradient_decay,
    rate_laws, DecayFit, FitWindow,
};
use spinflow_core::energy::GaugeContext;
use spinflow_core::flow::{
    configuration_distance, reconstruct_gauged, run_observed, FlowKind, FlowTrace, GaugeReconstructor, NormColumn,
};
use spinflow_core::grid::{read_snapshot, write_snapshot, Grid, MetricField, Snapshot};
use spinflow_core::spin::Configuration;
use thiserror::Error;

use crate::checks::{check, CheckReport};
use crate::config::{parse_config, ConfigErrors, ExperimentConfig, Reference};
use crate::synth::{configuration_checksum, synthesize_initial, SynthError};

/// Overrides the root that relative output directories are resolved against.
pub const OUTPUT_ROOT_VAR: &str = "SPINFLOW_OUTPUT_ROOT";

const CONFIG_MARKER: &str = "--- config ---";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("output directory {0} already holds a run")]
    Exists(PathBuf),

    #[error("configuration rejected:\n{0}")]
    Config(#[from] ConfigErrors),

    #[error("initial data: {0}")]
    Synth(#[from] SynthError),

    #[error(transparent)]
    Core(#[from] spinflow_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Format(String),
}

type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

/// `dir` itself when absolute, else joined onto `$SPINFLOW_OUTPUT_ROOT`
/// (or the working directory).
pub fn resolve_output(dir: &Path) -> PathBuf {
    if dir.is_absolute() {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir.to_path_buf(),
    }
}

pub fn reference_metric(cfg: &ExperimentConfig, grid: Grid) -> Result<MetricField> {
    Ok(match cfg.gauge.reference {
        Reference::Flat => MetricField::flat(grid),
        Reference::Diagonal(d) => MetricField::constant(grid, Matrix3::from_diagonal(&d.into()))?,
    })
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }
}

fn record_fit(report: &mut Report, prefix: &str, fit: std::result::Result<DecayFit, spinflow_core::Error>) {
    match fit {
        Ok(f) => {
            report.set(&format!("{prefix}_model"), format!("{:?}", f.model));
            report.set(&format!("{prefix}_rate"), f.rate);
            report.set(&format!("{prefix}_amplitude"), f.amplitude);
            report.set(&format!("{prefix}_offset"), f.offset);
            report.set(&format!("{prefix}_r_squared"), f.r_squared);
            report.set(&format!("{prefix}_window"), format!("{} {}", f.window.0, f.window.1));
            report.set(&format!("{prefix}_rows"), f.rows);
        }
        Err(e) => report.set(&format!("{prefix}_error"), e),
    }
}

/// Decay analysis of a trace: energy and gradient fits, the exponent
/// estimate and the rate laws it implies.
pub fn analyze_trace(trace: &FlowTrace, e_limit: Option<f64>) -> Report {
    let mut report = Report::default();
    let (Some(first), Some(last)) = (trace.rows.first(), trace.last()) else {
        report.set("status", "empty trace");
        return report;
    };
    report.set("rows", trace.len());
    report.set("t_final", last.t);
    report.set("energy_initial", first.energy);
    report.set("energy_final", last.energy);
    report.set("q_l2_initial", first.q_l2);
    report.set("q_l2_final", last.q_l2);
    if first.energy <= 1e-14 && first.q_l2 <= 1e-14 {
        report.set("status", "already critical");
        report.set("decay_fit", "skipped");
        return report;
    }
    let limit = match e_limit {
        Some(v) => {
            report.set("e_limit_source", "given");
            v
        }
        None => {
            report.set("e_limit_source", "extrapolated");
            estimate_energy_limit(trace).unwrap_or(0.0)
        }
    };
    report.set("e_limit", limit);
    report.set("status", if last.q_l2 < first.q_l2 / 100.0 { "converging" } else { "not converged" });
    record_fit(&mut report, "energy_fit", fit_energy_decay(trace, limit, FitWindow::default()));
    for (name, column) in [("q_l2_fit", NormColumn::L2), ("q_hm3_fit", NormColumn::HMinus3), ("q_hk_fit", NormColumn::Hk)] {
        record_fit(&mut report, name, fit_gradient_decay(trace, column, FitWindow::default()));
    }
    let t: Vec<f64> = trace.rows.iter().map(|r| r.t).collect();
    record_fit(&mut report, "dissipation_fit", fit_decay(&t, &dissipation_tail(trace), FitWindow::default()));
    match estimate_theta(trace, limit) {
        Ok(th) => {
            report.set("theta", th.theta);
            report.set("theta_band", format!("{} {}", th.confidence_band.0, th.confidence_band.1));
            report.set("theta_samples", th.sample_count);
            report.set("theta_clamped", th.clamped);
            match rate_laws(th.theta.min(2.0)) {
                Ok((beta, gamma)) => {
                    report.set("beta", beta);
                    report.set("gamma", gamma);
                }
                Err(e) => report.set("rate_laws_error", e),
            }
        }
        Err(e) => report.set("theta_error", e),
    }
    report
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub trace: FlowTrace,
    pub report: Report,
    pub checks: Option<CheckReport>,
    pub final_state: Configuration,
}

impl RunSummary {
    pub fn checks_passed(&self) -> bool {
        self.checks.as_ref().is_none_or(|c| c.passed())
    }
}

/// Metadata block of `manifest.txt` and the configuration echoed below it.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub fields: BTreeMap<String, String>,
    pub config_text: String,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::from("# spinflow run manifest\n");
        for (k, v) in &self.fields {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "{CONFIG_MARKER}");
        s.push_str(&self.config_text);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (head, config) = text
            .split_once(&format!("{CONFIG_MARKER}\n"))
            .ok_or_else(|| ExperimentError::Format("manifest lacks the configuration block".into()))?;
        let fields = Report::parse(head).entries.into_iter().collect();
        Ok(Self { fields, config_text: config.to_string() })
    }

    pub fn config(&self) -> Result<ExperimentConfig> {
        Ok(parse_config(&self.config_text)?)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.txt");
        Self::parse(&fs::read_to_string(&path).map_err(io_err(&path))?)
    }
}

struct SnapshotWriter {
    dir: PathBuf,
    index: String,
    count: usize,
}

impl SnapshotWriter {
    fn new(run_dir: &Path) -> Result<Self> {
        let dir = run_dir.join("snapshots");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir, index: String::from("# index t file\n"), count: 0 })
    }

    fn write(&mut self, t: f64, config: &Configuration) -> Result<()> {
        let name = format!("snap_{:05}.spfl", self.count);
        let path = self.dir.join(&name);
        let mut w = create(&path)?;
        write_snapshot(&mut w, &Snapshot::Configuration(config.clone()))?;
        w.flush().map_err(io_err(&path))?;
        let _ = writeln!(self.index, "{} {t:.17e} {name}", self.count);
        self.count += 1;
        Ok(())
    }

    fn finish(self) -> Result<()> {
        write_text(&self.dir.join("index.txt"), &self.index)
    }
}

/// Snapshots listed in a run directory's index, in time order.
pub fn read_snapshots(run_dir: &Path) -> Result<Vec<(f64, Configuration)>> {
    let dir = run_dir.join("snapshots");
    let index_path = dir.join("index.txt");
    let index = fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
    let mut out = Vec::new();
    for line in index.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [_, t, name] = parts[..] else {
            return Err(ExperimentError::Format(format!("bad snapshot index line `{line}`")));
        };
        let t: f64 = t.parse().map_err(|_| ExperimentError::Format(format!("bad time in `{line}`")))?;
        let path = dir.join(name);
        let snap = read_snapshot(BufReader::new(File::open(&path).map_err(io_err(&path))?))?;
        match snap {
            Snapshot::Configuration(c) => out.push((t, c)),
            _ => return Err(ExperimentError::Format(format!("{name} does not hold a configuration"))),
        }
    }
    Ok(out)
}

/// Runs `cfg` into its resolved output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    run_experiment_in(cfg, &resolve_output(&cfg.output_dir))
}

/// Runs `cfg` into `dir`, which must not already hold a run. Failures after
/// the directory is created are recorded in the manifest.
pub fn run_experiment_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    if dir.join("manifest.txt").exists() {
        return Err(ExperimentError::Exists(dir.to_path_buf()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let start = Instant::now();
    let mut manifest = Manifest { fields: BTreeMap::new(), config_text: cfg.to_text() };
    manifest.fields.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    manifest.fields.insert("threads".into(), cfg.threads.to_string());
    let outcome = execute(cfg, dir, &mut manifest);
    manifest.fields.insert("wall_time_s".into(), format!("{:.3}", start.elapsed().as_secs_f64()));
    match &outcome {
        Ok(summary) => {
            let status = if summary.checks_passed() { "ok" } else { "checks failed" };
            manifest.fields.insert("status".into(), status.into());
        }
        Err(e) => {
            manifest.fields.insert("status".into(), "failed".into());
            manifest.fields.insert("error".into(), e.to_string().replace('\n', "; "));
        }
    }
    write_text(&dir.join("manifest.txt"), &manifest.render())?;
    outcome
}

fn comparison_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let step = cfg.gauge.compare_every;
    (1..).map(|k| k as f64 * step).take_while(|&t| t < cfg.flow.t_end).chain([cfg.flow.t_end]).collect()
}

fn execute(cfg: &ExperimentConfig, dir: &Path, manifest: &mut Manifest) -> Result<RunSummary> {
    let grid = Grid::new(cfg.n)?;
    let checks = cfg.suite.map(check);
    if let Some(report) = &checks {
        write_text(&dir.join("checks.txt"), &report.render())?;
    }

    let initial = synthesize_initial(cfg.recipe, grid, cfg.seed)?;
    manifest.fields.insert("initial_checksum".into(), configuration_checksum(&initial));
    let reference = reference_metric(cfg, grid)?;
    let gauge = (cfg.flow.kind == FlowKind::Gauged).then(|| GaugeContext::new(reference.clone()));
    let mut integrator = cfg.flow.integrator();

    // The spinor flow pushed forward by the mapping flow, at the comparison times.
    let mut reconstructed: Vec<(f64, Configuration)> = Vec::new();
    if cfg.gauge.reconstruct {
        integrator.checkpoints = comparison_times(cfg);
        let mut rec = GaugeReconstructor::new(reference.clone(), integrator.clone(), cfg.gauge.interpolation)?;
        let stops = integrator.checkpoints.clone();
        run_observed(FlowKind::Spinor, &initial, integrator.clone(), None, |info, state| {
            rec.advance(info.row.t, state.metric())?;
            if stops.contains(&info.row.t) {
                reconstructed.push((info.row.t, rec.reconstruct(state)?));
            }
            Ok(())
        })?;
    }

    let mut snapshots = SnapshotWriter::new(dir)?;
    let mut trace = FlowTrace::new();
    let mut gauge_rows = String::from("# t discrepancy\n");
    let mut discrepancy_max: f64 = 0.0;
    let mut steps = 0usize;
    let mut dissipation = 0.0;
    let mut last_written = None;
    let mut failure = None;
    let (final_state, full_trace) = run_observed(cfg.flow.kind, &initial, integrator, gauge, |info, state| {
        dissipation += info.report.quadrature;
        if steps.is_multiple_of(cfg.trace_every) {
            trace.push(info.row);
        }
        let snap_due = steps == 0 || (cfg.snapshot_every > 0 && steps.is_multiple_of(cfg.snapshot_every));
        if snap_due {
            if let Err(e) = snapshots.write(info.row.t, state) {
                failure = Some(e);
            }
            last_written = Some(steps);
        }
        if let Some((_, rec)) = reconstructed.iter().find(|(t, _)| *t == info.row.t) {
            let d = configuration_distance(state, rec)?;
            discrepancy_max = discrepancy_max.max(d);
            let _ = writeln!(gauge_rows, "{:.17e} {d:.17e}", info.row.t);
        }
        steps += 1;
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if trace.last().map(|r| r.t) != full_trace.last().map(|r| r.t) {
        if let Some(row) = full_trace.last() {
            trace.push(*row);
        }
    }
    if last_written != Some(steps - 1) {
        snapshots.write(full_trace.last().map_or(0.0, |r| r.t), &final_state)?;
    }
    snapshots.finish()?;

    let trace_path = dir.join("trace.txt");
    let mut w = create(&trace_path)?;
    trace.write(&mut w)?;
    w.flush().map_err(io_err(&trace_path))?;

    let mut report = analyze_trace(&full_trace, cfg.e_limit);
    report.set("flow", cfg.flow.kind.name());
    // Only the ungauged flow dissipates energy at the rate `||V||^2`.
    if let (FlowKind::Spinor, Some(first), Some(last)) = (cfg.flow.kind, full_trace.rows.first(), full_trace.last()) {
        report.set("dissipation", dissipation);
        report.set("energy_identity_defect", (last.energy - first.energy + dissipation).abs());
    }
    report.set("initial_checksum", manifest.fields["initial_checksum"].clone());
    if cfg.gauge.reconstruct {
        report.set("gauge_discrepancy_max", discrepancy_max);
        write_text(&dir.join("gauge.txt"), &gauge_rows)?;
    }
    if let Some(c) = &checks {
        report.set("checks", if c.passed() { "pass" } else { "fail" });
    }
    write_text(&dir.join("report.txt"), &report.render())?;
    Ok(RunSummary { dir: dir.to_path_buf(), trace, report, checks, final_state })
}

/// Replays the mapping flow along a run's snapshots and writes the pushed
/// forward configurations to `reconstructed/`, with the displacement size
/// and the pointwise spinor-norm defect per snapshot in `reconstruction.txt`.
pub fn reconstruct_run(run_dir: &Path) -> Result<Report> {
    let manifest = Manifest::read(run_dir)?;
    let cfg = manifest.config()?;
    let trajectory = read_snapshots(run_dir)?;
    let Some((_, first)) = trajectory.first() else {
        return Err(ExperimentError::Format("run holds no snapshots".into()));
    };
    let reference = reference_metric(&cfg, first.grid())?;
    let out = reconstruct_gauged(&trajectory, &reference, cfg.flow.integrator(), cfg.gauge.interpolation)?;
    let dir = run_dir.join("reconstructed");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut table = String::from("# t umax norm_defect\n");
    let mut report = Report::default();
    let mut umax_all: f64 = 0.0;
    let mut defect_all: f64 = 0.0;
    for (k, ((t, _), (diffeo, config))) in trajectory.iter().zip(&out).enumerate() {
        let umax = diffeo.displacement().max_norm();
        let (lo, hi) = config.spinor_norm_range();
        let defect = (1.0 - lo).abs().max((hi - 1.0).abs());
        umax_all = umax_all.max(umax);
        defect_all = defect_all.max(defect);
        let _ = writeln!(table, "{t:.17e} {umax:.17e} {defect:.17e}");
        let path = dir.join(format!("snap_{k:05}.spfl"));
        let mut w = create(&path)?;
        write_snapshot(&mut w, &Snapshot::Configuration(config.clone()))?;
        w.flush().map_err(io_err(&path))?;
    }
    write_text(&run_dir.join("reconstruction.txt"), &table)?;
    report.set("snapshots", trajectory.len());
    report.set("displacement_max", umax_all);
    report.set("norm_defect_max", defect_all);
    Ok(report)
}
