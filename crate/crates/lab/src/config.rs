//! Experiment configuration: an INI-style text format with `[section]`
//! headers, `key = value` lines and `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use spinflow_core::flow::{FlowKind, IntegratorConfig, Scheme};
use spinflow_core::spin::Interpolation;
use thiserror::Error;

use crate::checks::Suite;
use crate::synth::Recipe;

/// One problem found in a configuration text; `line` is 0 for problems not
/// tied to a single line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", render_issues(.0))]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

fn render_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n")
}

/// Reference metric of the gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Flat,
    /// Constant diagonal metric.
    Diagonal([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeSpec {
    pub reference: Reference,
    /// Run the spinor flow alongside a gauged run and compare after pushing
    /// it forward by the mapping flow.
    pub reconstruct: bool,
    /// Spacing of the comparison times of a reconstruction run.
    pub compare_every: f64,
    pub interpolation: Interpolation,
}

impl Default for GaugeSpec {
    fn default() -> Self {
        Self { reference: Reference::Flat, reconstruct: false, compare_every: 1.0, interpolation: Interpolation::default() }
    }
}

/// Integrator settings exposed in the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSettings {
    pub kind: FlowKind,
    pub scheme: Scheme,
    pub dt_initial: f64,
    pub dt_max: f64,
    pub rel_tol: f64,
    pub t_end: f64,
    pub renormalize_spinor: bool,
    pub stop_threshold: f64,
    pub hk_order: f64,
    pub max_steps: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            kind: FlowKind::Spinor,
            scheme: d.scheme,
            dt_initial: d.dt_initial,
            dt_max: d.dt_max,
            rel_tol: d.rel_tol,
            t_end: d.t_end,
            renormalize_spinor: d.renormalize_spinor,
            stop_threshold: d.stop_threshold,
            hk_order: d.hk_order,
            max_steps: d.max_steps,
        }
    }
}

impl FlowSettings {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.scheme,
            dt_initial: self.dt_initial,
            dt_max: self.dt_max,
            rel_tol: self.rel_tol,
            t_end: self.t_end,
            renormalize_spinor: self.renormalize_spinor,
            stop_threshold: self.stop_threshold,
            hk_order: self.hk_order,
            max_steps: self.max_steps,
            ..IntegratorConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Recorded for reproducibility; reductions use a fixed order either way.
    pub threads: usize,
    pub flow: FlowSettings,
    pub recipe: Recipe,
    pub seed: u64,
    pub gauge: GaugeSpec,
    /// Accepted steps between trace rows.
    pub trace_every: usize,
    /// Accepted steps between snapshots; 0 keeps only the first and last.
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
    pub suite: Option<Suite>,
    /// `None` estimates the limit energy from the trace.
    pub e_limit: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 8,
            threads: 1,
            flow: FlowSettings::default(),
            recipe: Recipe::FlatConstant,
            seed: 0,
            gauge: GaugeSpec::default(),
            trace_every: 1,
            snapshot_every: 0,
            output_dir: PathBuf::from("run"),
            suite: None,
            e_limit: Some(0.0),
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["n", "threads"]),
    (
        "flow",
        &[
            "kind",
            "scheme",
            "dt_initial",
            "dt_max",
            "rel_tol",
            "t_end",
            "renormalize_spinor",
            "stop_threshold",
            "hk_order",
            "max_steps",
        ],
    ),
    ("init", &["recipe", "amplitude", "mode", "k", "cutoff", "seed"]),
    ("gauge", &["reference", "reconstruct", "compare_every", "interpolation"]),
    ("output", &["dir", "trace_every", "snapshot_every"]),
    ("analysis", &["e_limit"]),
    ("checks", &["suite"]),
];

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, line: usize, message: impl Into<String>) {
        self.issues.push(ConfigIssue { line, message: message.into() });
    }

    fn raw(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.entries.get(&(section.to_string(), key.to_string())).map(|e| (e.value.as_str(), e.line))
    }

    fn get<T>(&mut self, section: &str, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<(T, usize)> {
        let (value, line) = self.raw(section, key)?;
        let value = value.to_string();
        match parse(&value) {
            Some(v) => Some((v, line)),
            None => {
                self.issue(line, format!("[{section}] {key}: expected {what}, got `{value}`"));
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str) -> Option<(f64, usize)> {
        self.get(section, key, "a finite number", |s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
    }

    fn unsigned(&mut self, section: &str, key: &str) -> Option<(u64, usize)> {
        self.get(section, key, "an unsigned 64-bit integer", |s| s.parse::<u64>().ok())
    }

    fn usize(&mut self, section: &str, key: &str) -> Option<(usize, usize)> {
        self.get(section, key, "a nonnegative integer", |s| s.parse::<usize>().ok())
    }

    fn boolean(&mut self, section: &str, key: &str) -> Option<(bool, usize)> {
        self.get(section, key, "true or false", |s| match s {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    fn check(&mut self, ok: bool, line: usize, message: &str) {
        if !ok {
            self.issue(line, message.to_string());
        }
    }
}

fn scan(text: &str) -> Reader {
    let mut reader = Reader { entries: BTreeMap::new(), issues: Vec::new() };
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']').map(str::trim) {
                Some(name) if KEYS.iter().any(|(s, _)| *s == name) => section = Some(name.to_string()),
                Some(name) => {
                    reader.issue(line, format!("unknown section [{name}]"));
                    section = None;
                }
                None => reader.issue(line, format!("malformed section header `{content}`")),
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            reader.issue(line, format!("expected `key = value`, got `{content}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            reader.issue(line, format!("key `{key}` outside of any known section"));
            continue;
        };
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            reader.issue(line, format!("unknown key `{key}` in [{sec}]"));
            continue;
        }
        let slot = (sec.clone(), key.to_string());
        if let Some(first) = reader.entries.get(&slot) {
            let first_line = first.line;
            reader.issue(line, format!("duplicate key `{key}` in [{sec}] (lines {first_line} and {line})"));
            continue;
        }
        reader.entries.insert(slot, Entry { value: value.to_string(), line });
    }
    reader
}

fn parse_interpolation(s: &str) -> Option<Interpolation> {
    if s == "trigonometric" {
        return Some(Interpolation::Trigonometric);
    }
    let p = s.strip_prefix("lagrange")?.parse::<usize>().ok()?;
    Some(Interpolation::Lagrange(p))
}

fn interpolation_name(i: Interpolation) -> String {
    match i {
        Interpolation::Trigonometric => "trigonometric".into(),
        Interpolation::Lagrange(p) => format!("lagrange{p}"),
    }
}

fn parse_reference(s: &str) -> Option<Reference> {
    if s == "flat" {
        return Some(Reference::Flat);
    }
    let parts: Vec<f64> = s.strip_prefix("diagonal")?.split_whitespace().map(|p| p.parse().ok()).collect::<Option<_>>()?;
    let d: [f64; 3] = parts.try_into().ok()?;
    Some(Reference::Diagonal(d))
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut r = scan(text);
    let mut cfg = ExperimentConfig::default();

    if let Some((n, line)) = r.usize("grid", "n") {
        r.check(n >= 4, line, "N must be at least 4");
        r.check(n.is_power_of_two(), line, "N must be a power of two");
        cfg.n = n;
    }
    if let Some((t, line)) = r.usize("grid", "threads") {
        r.check(t >= 1, line, "threads must be at least 1");
        cfg.threads = t;
    }

    let f = &mut cfg.flow;
    if let Some((kind, line)) = r.get("flow", "kind", "a flow kind (spinor, gauged, volume_normalized)", |s| s.parse::<FlowKind>().ok()) {
        r.check(kind != FlowKind::Mapping, line, "the mapping flow needs a metric trajectory; use `reconstruct`");
        f.kind = kind;
    }
    if let Some((s, _)) = r.get("flow", "scheme", "bs23 or rkc", |s| s.parse::<Scheme>().ok()) {
        f.scheme = s;
    }
    if let Some((v, _)) = r.float("flow", "dt_initial") {
        f.dt_initial = v;
    }
    if let Some((v, _)) = r.float("flow", "dt_max") {
        f.dt_max = v;
    }
    if let Some((v, line)) = r.float("flow", "rel_tol") {
        r.check(v > 1e-12 && v < 1e-2, line, "rel_tol must lie in (1e-12, 1e-2)");
        f.rel_tol = v;
    }
    if let Some((v, line)) = r.float("flow", "t_end") {
        r.check(v > 0.0, line, "t_end must be positive");
        f.t_end = v;
    }
    if let Some((v, _)) = r.boolean("flow", "renormalize_spinor") {
        f.renormalize_spinor = v;
    }
    if let Some((v, line)) = r.float("flow", "stop_threshold") {
        r.check(v >= 0.0, line, "stop_threshold must be nonnegative");
        f.stop_threshold = v;
    }
    if let Some((v, _)) = r.float("flow", "hk_order") {
        f.hk_order = v;
    }
    if let Some((v, line)) = r.usize("flow", "max_steps") {
        r.check(v >= 1, line, "max_steps must be at least 1");
        f.max_steps = v;
    }
    let dt_line = r.raw("flow", "dt_initial").or(r.raw("flow", "dt_max")).map_or(0, |(_, l)| l);
    let (dt0, dtm) = (cfg.flow.dt_initial, cfg.flow.dt_max);
    r.check(dt0 > 0.0 && dt0 <= dtm, dt_line, "need 0 < dt_initial <= dt_max");

    cfg.recipe = parse_recipe(&mut r);
    if let Some((seed, _)) = r.unsigned("init", "seed") {
        cfg.seed = seed;
    }

    if let Some((reference, line)) = r.get("gauge", "reference", "flat or `diagonal a b c`", parse_reference) {
        if let Reference::Diagonal(d) = reference {
            r.check(d.iter().all(|&v| v > 0.0), line, "diagonal reference entries must be positive");
        }
        cfg.gauge.reference = reference;
    }
    if let Some((v, _)) = r.boolean("gauge", "reconstruct") {
        cfg.gauge.reconstruct = v;
    }
    if let Some((v, line)) = r.float("gauge", "compare_every") {
        r.check(v > 0.0, line, "compare_every must be positive");
        cfg.gauge.compare_every = v;
    }
    if let Some((v, line)) = r.get("gauge", "interpolation", "trigonometric or lagrangeP", parse_interpolation) {
        let grid_ok = spinflow_core::grid::Grid::new(cfg.n).map(|g| v.validate(g).is_ok()).unwrap_or(true);
        r.check(grid_ok, line, "interpolation is not supported on this grid");
        cfg.gauge.interpolation = v;
    }
    if cfg.gauge.reconstruct {
        let line = r.raw("gauge", "reconstruct").map_or(0, |(_, l)| l);
        r.check(cfg.flow.kind == FlowKind::Gauged, line, "reconstruct requires kind = gauged");
    }

    if let Some((dir, line)) = r.raw("output", "dir").map(|(v, l)| (v.to_string(), l)) {
        r.check(!dir.is_empty(), line, "output dir must not be empty");
        cfg.output_dir = PathBuf::from(dir);
    }
    if let Some((v, line)) = r.usize("output", "trace_every") {
        r.check(v >= 1, line, "trace_every must be at least 1");
        cfg.trace_every = v;
    }
    if let Some((v, _)) = r.usize("output", "snapshot_every") {
        cfg.snapshot_every = v;
    }

    if let Some((v, line)) = r.raw("analysis", "e_limit").map(|(v, l)| (v.to_string(), l)) {
        if v == "auto" {
            cfg.e_limit = None;
        } else {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => cfg.e_limit = Some(x),
                _ => r.issue(line, format!("[analysis] e_limit: expected `auto` or a nonnegative number, got `{v}`")),
            }
        }
    }
    if let Some((v, _)) = r.get("checks", "suite", "none, algebra, gradient, flows, decay or all", |s| {
        if s == "none" { Some(None) } else { s.parse::<Suite>().ok().map(Some) }
    }) {
        cfg.suite = v;
    }

    if r.issues.is_empty() {
        Ok(cfg)
    } else {
        r.issues.sort_by_key(|i| i.line);
        Err(ConfigErrors(r.issues))
    }
}

fn parse_recipe(r: &mut Reader) -> Recipe {
    let Some((name, line)) = r.raw("init", "recipe").map(|(v, l)| (v.to_string(), l)) else {
        for key in ["amplitude", "mode", "k", "cutoff"] {
            if let Some((_, l)) = r.raw("init", key) {
                r.issue(l, format!("key `{key}` does not apply to recipe flat_constant"));
            }
        }
        return Recipe::FlatConstant;
    };
    let params: &[&str] = match name.as_str() {
        "flat_constant" => &[],
        "metric_bump" => &["amplitude", "mode"],
        "spinor_wave" => &["k"],
        "random_smooth" => &["amplitude", "cutoff"],
        "slice_random" => &["amplitude"],
        _ => {
            r.issue(line, format!("unknown recipe `{name}`"));
            return Recipe::FlatConstant;
        }
    };
    for key in ["amplitude", "mode", "k", "cutoff"] {
        if !params.contains(&key) {
            if let Some((_, l)) = r.raw("init", key) {
                r.issue(l, format!("key `{key}` does not apply to recipe {name}"));
            }
        }
    }
    let amplitude = r.float("init", "amplitude").map_or(1e-2, |(v, l)| {
        r.check(v >= 0.0, l, "amplitude must be nonnegative");
        v
    });
    let positive = |r: &mut Reader, key: &str, default: u32| {
        r.usize("init", key).map_or(default, |(v, l)| {
            r.check(v >= 1 && v <= u32::MAX as usize, l, &format!("{key} must be a positive integer"));
            v as u32
        })
    };
    match name.as_str() {
        "metric_bump" => Recipe::MetricBump { amplitude, mode: positive(r, "mode", 1) },
        "spinor_wave" => Recipe::SpinorWave { k: positive(r, "k", 1) },
        "random_smooth" => Recipe::RandomSmooth { amplitude, cutoff: positive(r, "cutoff", 2) },
        "slice_random" => Recipe::SliceRandom { amplitude },
        _ => Recipe::FlatConstant,
    }
}

impl ExperimentConfig {
    /// Canonical text form; [`parse_config`] of the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = &self.flow;
        let _ = writeln!(s, "[grid]\nn = {}\nthreads = {}\n", self.n, self.threads);
        let _ = writeln!(
            s,
            "[flow]\nkind = {}\nscheme = {}\ndt_initial = {:?}\ndt_max = {:?}\nrel_tol = {:?}\nt_end = {:?}\n\
             renormalize_spinor = {}\nstop_threshold = {:?}\nhk_order = {:?}\nmax_steps = {}\n",
            f.kind.name(),
            f.scheme.name(),
            f.dt_initial,
            f.dt_max,
            f.rel_tol,
            f.t_end,
            f.renormalize_spinor,
            f.stop_threshold,
            f.hk_order,
            f.max_steps
        );
        let _ = writeln!(s, "[init]\nrecipe = {}", self.recipe.name());
        match self.recipe {
            Recipe::FlatConstant => {}
            Recipe::MetricBump { amplitude, mode } => {
                let _ = writeln!(s, "amplitude = {amplitude:?}\nmode = {mode}");
            }
            Recipe::SpinorWave { k } => {
                let _ = writeln!(s, "k = {k}");
            }
            Recipe::RandomSmooth { amplitude, cutoff } => {
                let _ = writeln!(s, "amplitude = {amplitude:?}\ncutoff = {cutoff}");
            }
            Recipe::SliceRandom { amplitude } => {
                let _ = writeln!(s, "amplitude = {amplitude:?}");
            }
        }
        let _ = writeln!(s, "seed = {}\n", self.seed);
        let reference = match self.gauge.reference {
            Reference::Flat => "flat".to_string(),
            Reference::Diagonal(d) => format!("diagonal {:?} {:?} {:?}", d[0], d[1], d[2]),
        };
        let _ = writeln!(
            s,
            "[gauge]\nreference = {reference}\nreconstruct = {}\ncompare_every = {:?}\ninterpolation = {}\n",
            self.gauge.reconstruct,
            self.gauge.compare_every,
            interpolation_name(self.gauge.interpolation)
        );
        let _ = writeln!(
            s,
            "[output]\ndir = {}\ntrace_every = {}\nsnapshot_every = {}\n",
            self.output_dir.display(),
            self.trace_every,
            self.snapshot_every
        );
        let e_limit = self.e_limit.map_or("auto".to_string(), |v| format!("{v:?}"));
        let _ = writeln!(s, "[analysis]\ne_limit = {e_limit}\n");
        let suite = self.suite.map_or("none", |s| s.name());
        let _ = writeln!(s, "[checks]\nsuite = {suite}");
        s
    }
}
