use nalgebra::{Matrix3, Vector3};

use super::integrator::{IntegratorConfig, OdeSystem, Stepper};
use crate::error::{Error, Result};
use crate::grid::{divergence, l2_inner, symmetrize, Field, Grid, MetricField, VectorField};
use crate::spin::{pushforward, Configuration, Diffeo, Interpolation, ResampledDiffeo, TangentSection};

/// The evolving diffeomorphism of the mapping flow, `f = id + u`.
pub type DiffeoState = ResampledDiffeo;

fn is_constant(g: &MetricField) -> bool {
    let first = *g.at(0);
    g.field().iter().all(|m| *m == first)
}

/// `f^* gbar = J^T gbar(f) J` at the nodes.
pub fn pullback_metric(gbar: &MetricField, f: &DiffeoState) -> Result<MetricField> {
    let grid = f.grid();
    grid.check_same(&gbar.grid())?;
    let constant = is_constant(gbar);
    let jac = f.jacobian();
    let u = f.displacement();
    let pulled = Field::from_fn(grid, |idx| {
        let at_image = if constant {
            *gbar.at(0)
        } else {
            f.interpolator().interpolate(gbar.field(), &(grid.position(idx) + u[idx]))
        };
        symmetrize(&(jac[idx].transpose() * at_image * jac[idx]))
    });
    MetricField::new(pulled)
}

/// `P_{g, gbar}(f) = -df(X)` with `X = -2 (delta_{f^* gbar} g)^sharp`.
pub fn mapping_rhs(g: &MetricField, gbar: &MetricField, f: &DiffeoState) -> Result<VectorField> {
    g.grid().check_same(&f.grid())?;
    let pulled = pullback_metric(gbar, f)?;
    let x = divergence(&pulled, g.field())?;
    let jac = f.jacobian();
    Ok(Field::from_fn(g.grid(), |idx| jac[idx] * x[idx] * 2.0))
}

fn pack_vector(v: &VectorField) -> Vec<f64> {
    v.iter().flat_map(|x| [x[0], x[1], x[2]]).collect()
}

fn unpack_vector(grid: Grid, y: &[f64]) -> Result<VectorField> {
    if y.len() != 3 * grid.len() {
        return Err(Error::Domain(format!("state has {} entries, expected {}", y.len(), 3 * grid.len())));
    }
    Field::from_vec(grid, y.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect())
}

/// A metric path known at two times, linear in between.
#[derive(Debug, Clone)]
struct PathSegment {
    t0: f64,
    g0: Field<Matrix3<f64>>,
    t1: f64,
    g1: Field<Matrix3<f64>>,
}

impl PathSegment {
    fn at(&self, t: f64) -> Result<MetricField> {
        if self.t1 <= self.t0 {
            return MetricField::new(self.g1.clone());
        }
        let s = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        MetricField::new(self.g0.scaled(1.0 - s).axpy(s, &self.g1))
    }
}

/// The mapping flow `d/dt f = P_{g_t, gbar}(f)` along a piecewise linear metric path.
pub struct MappingSystem {
    grid: Grid,
    reference: MetricField,
    interp: Interpolation,
    segment: PathSegment,
}

impl MappingSystem {
    fn diffeo(&self, y: &[f64]) -> Result<DiffeoState> {
        ResampledDiffeo::new(unpack_vector(self.grid, y)?, self.interp)
    }
}

impl OdeSystem for MappingSystem {
    fn rhs(&mut self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let f = self.diffeo(y)?;
        let g = self.segment.at(t)?;
        Ok(pack_vector(&mapping_rhs(&g, &self.reference, &f)?))
    }
}

/// Integrates the mapping flow alongside a stream of metric snapshots and
/// pushes configurations forward by the current diffeomorphism.
pub struct GaugeReconstructor {
    system: MappingSystem,
    stepper: Stepper,
    started: bool,
    steps: usize,
}

impl GaugeReconstructor {
    /// Starts at the identity; the first snapshot fixes the initial time.
    pub fn new(reference: MetricField, cfg: IntegratorConfig, interp: Interpolation) -> Result<Self> {
        cfg.validate()?;
        let grid = reference.grid();
        interp.validate(grid)?;
        let g = reference.field().clone();
        let segment = PathSegment { t0: 0.0, g0: g.clone(), t1: 0.0, g1: g };
        let stepper = Stepper::new(cfg, 0.0, vec![0.0; 3 * grid.len()]);
        Ok(Self { system: MappingSystem { grid, reference, interp, segment }, stepper, started: false, steps: 0 })
    }

    pub fn t(&self) -> f64 {
        self.stepper.t
    }

    /// Accepted mapping-flow steps so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Feeds the metric at time `t` and integrates the mapping flow up to it.
    pub fn advance(&mut self, t: f64, g: &MetricField) -> Result<()> {
        self.system.grid.check_same(&g.grid())?;
        if !self.started {
            self.started = true;
            self.stepper.t = t;
            self.system.segment = PathSegment { t0: t, g0: g.field().clone(), t1: t, g1: g.field().clone() };
            self.stepper.reset_state(self.stepper.y.clone());
            return Ok(());
        }
        if t < self.stepper.t {
            return Err(Error::Domain(format!("snapshot time {t} precedes {}", self.stepper.t)));
        }
        if t == self.stepper.t {
            return Ok(());
        }
        let prev = std::mem::replace(&mut self.system.segment.g1, g.field().clone());
        self.system.segment.g0 = prev;
        self.system.segment.t0 = self.system.segment.t1;
        self.system.segment.t1 = t;
        while self.stepper.t < t {
            let t0 = self.stepper.t;
            self.stepper.step(&mut self.system, t).map_err(|e| match e {
                Error::FlowAbort { .. } => e,
                other => Error::FlowAbort { t: t0, reason: format!("mapping flow: {other}") },
            })?;
            self.steps += 1;
        }
        Ok(())
    }

    pub fn diffeo(&self) -> Result<DiffeoState> {
        self.system.diffeo(&self.stepper.y)
    }

    /// `F_* config` with the current diffeomorphism.
    pub fn reconstruct(&self, config: &Configuration) -> Result<Configuration> {
        pushforward(&Diffeo::Resampled(self.diffeo()?), config)
    }
}

/// Runs the mapping flow along a stored trajectory and pushes every state forward.
pub fn reconstruct_gauged(
    trajectory: &[(f64, Configuration)],
    reference: &MetricField,
    cfg: IntegratorConfig,
    interp: Interpolation,
) -> Result<Vec<(DiffeoState, Configuration)>> {
    let mut rec = GaugeReconstructor::new(reference.clone(), cfg, interp)?;
    let mut out = Vec::with_capacity(trajectory.len());
    for (t, config) in trajectory {
        rec.advance(*t, config.metric())?;
        out.push((rec.diffeo()?, rec.reconstruct(config)?));
    }
    Ok(out)
}

/// `||a - b||_{L^2}` of the componentwise difference, measured with the metric of `a`.
pub fn configuration_distance(a: &Configuration, b: &Configuration) -> Result<f64> {
    let grid = a.grid();
    grid.check_same(&b.grid())?;
    let h = a.metric().field().axpy(-1.0, b.metric().field());
    let psi = a.spinor().axpy(-1.0, b.spinor());
    let d = TangentSection { h, psi };
    Ok(l2_inner(a.metric(), &d, &d)?.max(0.0).sqrt())
}
