use nalgebra::Matrix3;
use num_complex::Complex64;

use super::integrator::{IntegratorConfig, OdeSystem, StepReport, Stepper};
use super::trace::{FlowTrace, TraceRow};
use crate::energy::{
    energy_and_gradient_with, gauged_energy_and_gradient_with, integrated_trace, volume_normalize, GaugeContext,
    GradientResult,
};
use crate::error::{Error, Result};
use crate::grid::{sobolev_norms, total_volume, Field, Grid, MetricField, Spinor};
use crate::spin::{component_velocity_with, Configuration, FrameGeometry, TangentSection};

/// The four evolution equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// `d/dt Phi = Q(Phi)`.
    Spinor,
    /// `d/dt Phi = Q(Phi) + lambda^*(X(g))` with a reference metric.
    Gauged,
    /// `d/dt Phi = Q(Phi)` with the volume-weighted trace mean removed from `Q1`.
    VolumeNormalized,
    /// Diffeomorphisms driven by a metric path; see [`super::GaugeReconstructor`].
    Mapping,
}

impl FlowKind {
    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Spinor => "spinor",
            FlowKind::Gauged => "gauged",
            FlowKind::VolumeNormalized => "volume_normalized",
            FlowKind::Mapping => "mapping",
        }
    }
}

impl std::str::FromStr for FlowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spinor" => Ok(FlowKind::Spinor),
            "gauged" => Ok(FlowKind::Gauged),
            "volume_normalized" => Ok(FlowKind::VolumeNormalized),
            "mapping" => Ok(FlowKind::Mapping),
            other => Err(Error::Domain(format!("unknown flow kind `{other}`"))),
        }
    }
}

const PER_NODE: usize = 10;

/// Packs a configuration as `g_xx g_xy g_xz g_yy g_yz g_zz Re phi_1 Im phi_1 Re phi_2 Im phi_2` per node.
pub fn pack_configuration(c: &Configuration) -> Vec<f64> {
    pack_pair(c.metric().field(), c.spinor())
}

fn pack_pair(h: &Field<Matrix3<f64>>, psi: &Field<Spinor>) -> Vec<f64> {
    let mut y = Vec::with_capacity(PER_NODE * h.grid().len());
    for (m, p) in h.iter().zip(psi.iter()) {
        y.extend_from_slice(&[m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]);
        y.extend_from_slice(&[p[0].re, p[0].im, p[1].re, p[1].im]);
    }
    y
}

pub fn unpack_configuration(grid: Grid, y: &[f64]) -> Result<Configuration> {
    if y.len() != PER_NODE * grid.len() {
        return Err(Error::Domain(format!("state has {} entries, expected {}", y.len(), PER_NODE * grid.len())));
    }
    let node = |i: usize| &y[PER_NODE * i..PER_NODE * (i + 1)];
    let g = Field::from_fn(grid, |i| {
        let v = node(i);
        Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5])
    });
    let phi = Field::from_fn(grid, |i| {
        let v = node(i);
        Spinor::new(Complex64::new(v[6], v[7]), Complex64::new(v[8], v[9]))
    });
    Configuration::new_unconstrained(MetricField::new(g)?, phi)
}

/// Gradient and energy at one state together with the state itself.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub config: Configuration,
    pub energy: f64,
    /// Right-hand side of the flow in the tangent splitting.
    pub gradient: GradientResult,
}

/// Right-hand side of the configuration flows in packed form.
pub struct ConfigurationSystem {
    kind: FlowKind,
    gauge: Option<GaugeContext>,
    grid: Grid,
    renormalize: bool,
    last: Option<(Vec<f64>, Evaluation)>,
    last_rate: f64,
}

impl ConfigurationSystem {
    pub fn new(kind: FlowKind, grid: Grid, gauge: Option<GaugeContext>, renormalize: bool) -> Result<Self> {
        match kind {
            FlowKind::Mapping => {
                return Err(Error::Domain("the mapping flow evolves diffeomorphisms, not configurations".into()))
            }
            FlowKind::Gauged if gauge.is_none() => {
                return Err(Error::Domain("the gauged flow needs a reference metric".into()))
            }
            _ => {}
        }
        if let Some(ctx) = &gauge {
            grid.check_same(&ctx.reference_metric.grid())?;
        }
        Ok(Self { kind, gauge, grid, renormalize, last: None, last_rate: 0.0 })
    }

    pub fn evaluate(&self, config: &Configuration) -> Result<Evaluation> {
        self.evaluate_with(&FrameGeometry::new(config.metric())?, config)
    }

    fn evaluate_with(&self, geo: &FrameGeometry, config: &Configuration) -> Result<Evaluation> {
        let (energy, gradient) = match self.kind {
            FlowKind::Spinor => energy_and_gradient_with(geo, config)?,
            FlowKind::Gauged => gauged_energy_and_gradient_with(geo, self.gauge.as_ref().expect("checked"), config)?,
            FlowKind::VolumeNormalized => {
                let (e, q) = energy_and_gradient_with(geo, config)?;
                (e, volume_normalize(config.metric(), q))
            }
            FlowKind::Mapping => unreachable!(),
        };
        Ok(Evaluation { config: config.clone(), energy, gradient })
    }

    /// Evaluation at the packed state `y`, reusing the most recent one when possible.
    pub fn evaluation_at(&mut self, y: &[f64]) -> Result<Evaluation> {
        if let Some((ly, ev)) = &self.last {
            if ly.as_slice() == y {
                return Ok(ev.clone());
            }
        }
        let ev = self.evaluate(&unpack_configuration(self.grid, y)?)?;
        self.last = Some((y.to_vec(), ev.clone()));
        Ok(ev)
    }
}

impl OdeSystem for ConfigurationSystem {
    fn rhs(&mut self, _t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let config = unpack_configuration(self.grid, y)?;
        let geo = FrameGeometry::new(config.metric())?;
        let ev = self.evaluate_with(&geo, &config)?;
        let v = component_velocity_with(&geo.frames, &config, &ev.gradient.as_tangent())?;
        self.last_rate = ev.gradient.l2_norm(config.metric())?.powi(2);
        self.last = Some((y.to_vec(), ev));
        Ok(pack_pair(&v.h, &v.psi))
    }

    fn project(&mut self, y: &mut [f64]) -> f64 {
        if !self.renormalize {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for node in y.chunks_exact_mut(PER_NODE) {
            let norm = (node[6] * node[6] + node[7] * node[7] + node[8] * node[8] + node[9] * node[9]).sqrt();
            worst = worst.max((norm - 1.0).abs());
            for v in &mut node[6..] {
                *v /= norm;
            }
        }
        worst
    }

    /// `||V||_{L^2}^2` of the flow velocity, the energy dissipation rate of
    /// the ungauged flow.
    fn integrand(&self) -> f64 {
        self.last_rate
    }
}

/// Trace row of an evaluated state.
pub fn trace_row(t: f64, dt: f64, ev: &Evaluation, hk_order: f64) -> Result<TraceRow> {
    let q = &ev.gradient;
    let orders = [-3.0, hk_order];
    let (n1, n2) = (sobolev_norms(&q.q1, &orders), sobolev_norms(&q.q2, &orders));
    let (phi_min, phi_max) = ev.config.spinor_norm_range();
    Ok(TraceRow {
        t,
        energy: ev.energy,
        q_l2: q.l2_norm(ev.config.metric())?,
        q_hm3: n1[0].hypot(n2[0]),
        q_hk: n1[1].hypot(n2[1]),
        volume: total_volume(ev.config.metric()),
        phi_min,
        phi_max,
        dt,
    })
}

/// A configuration flow in progress.
pub struct Flow {
    kind: FlowKind,
    system: ConfigurationSystem,
    stepper: Stepper,
    grid: Grid,
}

/// Per-step record beyond the trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub report: StepReport,
    pub row: TraceRow,
    /// `int tr_g(Q1) vol_g` of the flow's metric velocity at the new state.
    pub trace_integral: f64,
}

impl Flow {
    pub fn new(kind: FlowKind, initial: &Configuration, cfg: IntegratorConfig, gauge: Option<GaugeContext>) -> Result<Self> {
        cfg.validate()?;
        let grid = initial.grid();
        let system = ConfigurationSystem::new(kind, grid, gauge, cfg.renormalize_spinor)?;
        let stepper = Stepper::new(cfg, 0.0, pack_configuration(initial));
        Ok(Self { kind, system, stepper, grid })
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn t(&self) -> f64 {
        self.stepper.t
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.stepper.cfg
    }

    pub fn state(&self) -> Result<Configuration> {
        unpack_configuration(self.grid, &self.stepper.y)
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.stepper.lambda_max()
    }

    pub fn evaluation(&mut self) -> Result<Evaluation> {
        self.system.evaluation_at(&self.stepper.y)
    }

    pub fn current_row(&mut self, dt: f64) -> Result<TraceRow> {
        let ev = self.evaluation()?;
        trace_row(self.t(), dt, &ev, self.stepper.cfg.hk_order)
    }

    /// Next time the integrator must land on.
    fn next_stop(&self) -> f64 {
        let t = self.stepper.t;
        self.stepper
            .cfg
            .checkpoints
            .iter()
            .copied()
            .filter(|&c| c > t && c < self.stepper.cfg.t_end)
            .fold(self.stepper.cfg.t_end, f64::min)
    }

    /// One accepted step, with the abort time attached to any failure.
    pub fn step(&mut self) -> Result<StepInfo> {
        let limit = self.next_stop();
        let t0 = self.t();
        let report = self.stepper.step(&mut self.system, limit).map_err(|e| match e {
            Error::FlowAbort { .. } => e,
            other => Error::FlowAbort { t: t0, reason: other.to_string() },
        })?;
        let ev = self.evaluation()?;
        let row = trace_row(report.t, report.dt, &ev, self.stepper.cfg.hk_order)?;
        let trace_integral = integrated_trace(ev.config.metric(), &ev.gradient.q1);
        Ok(StepInfo { report, row, trace_integral })
    }

    pub fn finished(&self, row: &TraceRow) -> bool {
        self.t() >= self.stepper.cfg.t_end || row.q_l2 < self.stepper.cfg.stop_threshold
    }
}

/// Integrates `kind` from `initial` until `t_end` or the stop threshold,
/// calling `observe` on the initial state and after every accepted step.
pub fn run_observed(
    kind: FlowKind,
    initial: &Configuration,
    cfg: IntegratorConfig,
    gauge: Option<GaugeContext>,
    mut observe: impl FnMut(&StepInfo, &Configuration) -> Result<()>,
) -> Result<(Configuration, FlowTrace)> {
    let max_steps = cfg.max_steps;
    let mut flow = Flow::new(kind, initial, cfg, gauge)?;
    let mut trace = FlowTrace::new();
    let row = flow.current_row(0.0)?;
    let ev = flow.evaluation()?;
    let first = StepInfo {
        report: StepReport { t: 0.0, dt: 0.0, error: 0.0, projection: 0.0, retries: 0, evaluations: 0, quadrature: 0.0 },
        row,
        trace_integral: integrated_trace(ev.config.metric(), &ev.gradient.q1),
    };
    observe(&first, &ev.config)?;
    trace.push(row);
    let mut done = flow.finished(&row);
    let mut steps = 0;
    while !done {
        if steps >= max_steps {
            return Err(Error::FlowAbort { t: flow.t(), reason: format!("step budget of {max_steps} exhausted") });
        }
        let info = flow.step()?;
        steps += 1;
        let state = flow.state()?;
        observe(&info, &state)?;
        trace.push(info.row);
        done = flow.finished(&info.row);
    }
    Ok((flow.state()?, trace))
}

pub fn run(
    kind: FlowKind,
    initial: &Configuration,
    cfg: IntegratorConfig,
    gauge: Option<GaugeContext>,
) -> Result<(Configuration, FlowTrace)> {
    run_observed(kind, initial, cfg, gauge, |_, _| Ok(()))
}

/// The flow's right-hand side at `config` as a tangent section.
pub fn flow_velocity(kind: FlowKind, config: &Configuration, gauge: Option<GaugeContext>) -> Result<TangentSection> {
    let sys = ConfigurationSystem::new(kind, config.grid(), gauge, false)?;
    Ok(sys.evaluate(config)?.gradient.into_tangent())
}
