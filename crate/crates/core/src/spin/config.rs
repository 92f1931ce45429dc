use nalgebra::Matrix3;

use super::clifford::{bivector_action, spin_lift, PAIRS};
use super::frame::NodeFrame;
use crate::error::{Error, Result};
use crate::grid::{
    is_positive_definite, symmetrize, Field, FieldValue, Grid, MetricField, Spinor, SpinorField,
    SymTensorField,
};

/// Tolerance on `| |phi| - 1 |` accepted by [`Configuration::new`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// A metric together with a spinor field stored in the metric's transferred
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    metric: MetricField,
    spinor: SpinorField,
}

impl Configuration {
    /// Builds a configuration, requiring `|phi| = 1` at every node.
    pub fn new(metric: MetricField, spinor: SpinorField) -> Result<Self> {
        let c = Self::new_unconstrained(metric, spinor)?;
        for (idx, p) in c.spinor.iter().enumerate() {
            let norm = p.norm_sqr().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::SpinorNorm { node: c.grid().coords(idx), norm });
            }
        }
        Ok(c)
    }

    /// Builds a configuration without the unit-norm requirement, as needed
    /// for intermediate integrator stages.
    pub fn new_unconstrained(metric: MetricField, spinor: SpinorField) -> Result<Self> {
        metric.grid().check_same(&spinor.grid())?;
        spinor.check_finite()?;
        Ok(Self { metric, spinor })
    }

    /// Flat metric with the same spinor value everywhere.
    pub fn flat_constant(grid: Grid, phi: Spinor) -> Result<Self> {
        let norm = phi.norm();
        Self::new(MetricField::flat(grid), Field::constant(grid, phi.scale(1.0 / norm)))
    }

    pub fn grid(&self) -> Grid {
        self.metric.grid()
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn spinor(&self) -> &SpinorField {
        &self.spinor
    }

    pub fn into_parts(self) -> (MetricField, SpinorField) {
        (self.metric, self.spinor)
    }

    /// Divides the spinor pointwise by its norm and returns the largest
    /// deviation `| |phi| - 1 |` seen before normalizing.
    pub fn renormalize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in self.spinor.as_mut_slice() {
            let norm = p.norm_sqr().sqrt();
            worst = worst.max((norm - 1.0).abs());
            *p = p.scale(1.0 / norm);
        }
        worst
    }

    /// `(min |phi|, max |phi|)` over all nodes.
    pub fn spinor_norm_range(&self) -> (f64, f64) {
        self.spinor.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
            let n = p.norm_sqr().sqrt();
            (lo.min(n), hi.max(n))
        })
    }

    pub fn translated(&self, shift: [isize; 3]) -> Self {
        Self { metric: self.metric.translated(shift), spinor: self.spinor.translated(shift) }
    }

    /// Scales the metric by `c^2`, keeping the spinor components.
    pub fn with_scaled_metric(&self, c: f64) -> Result<Self> {
        Ok(Self { metric: self.metric.scaled(c * c)?, spinor: self.spinor.clone() })
    }
}

/// A variation `(h, psi)` of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSection {
    pub h: SymTensorField,
    pub psi: SpinorField,
}

impl TangentSection {
    pub fn new(h: SymTensorField, psi: SpinorField) -> Result<Self> {
        h.grid().check_same(&psi.grid())?;
        Ok(Self { h, psi })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { h: Field::zeros(grid), psi: Field::zeros(grid) }
    }

    pub fn grid(&self) -> Grid {
        self.h.grid()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { h: self.h.scaled(s), psi: self.psi.scaled(s) }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self { h: self.h.axpy(s, &other.h), psi: self.psi.axpy(s, &other.psi) }
    }

    /// Removes the component of `psi` along `phi` pointwise.
    pub fn project_tangent(&mut self, phi: &SpinorField) {
        for (p, f) in self.psi.as_mut_slice().iter_mut().zip(phi.iter()) {
            *p = project_orthogonal(p, f);
        }
    }

    /// Largest `|Re<phi, psi>|` over the nodes.
    pub fn tangency_residual(&self, phi: &SpinorField) -> f64 {
        self.psi.iter().zip(phi.iter()).map(|(p, f)| f.dotc(p).re.abs()).fold(0.0, f64::max)
    }
}

/// `psi - Re<phi, psi> phi / |phi|^2`.
pub(crate) fn project_orthogonal(psi: &Spinor, phi: &Spinor) -> Spinor {
    let c = phi.dotc(psi).re / phi.norm_sqr();
    psi - phi.scale(c)
}

/// Rotation carrying the transferred frame of `g` to that of `g2` after
/// Bourguignon-Gauduchon transport: `g2^{1/2} g^{-1/2} (g^{-1/2} g2 g^{-1/2})^{-1/2}`.
fn transfer_rotation(base: &NodeFrame, g2: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let target = NodeFrame::new(g2)?;
    let s = symmetrize(&(base.inv_sqrt * g2 * base.inv_sqrt));
    let s_frame = NodeFrame::new(&s)?;
    Some(target.sqrt * base.inv_sqrt * s_frame.inv_sqrt)
}

/// The chart around `base`: `(h, psi) -> (g + h, transfer(phi + psi))`.
///
/// When the base metric is the identity at a node, the transfer acts
/// trivially there and the map is exact on components.
pub fn chart_to(base: &Configuration, t: &TangentSection) -> Result<Configuration> {
    let grid = base.grid();
    grid.check_same(&t.grid())?;
    let mut g = Vec::with_capacity(grid.len());
    let mut phi = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let g0 = base.metric.at(idx);
        let g2 = symmetrize(&(g0 + t.h[idx]));
        if !is_positive_definite(&g2) {
            return Err(Error::ChartDomain { node: grid.coords(idx) });
        }
        let p = base.spinor[idx] + t.psi[idx];
        let rotated = if *g0 == Matrix3::identity() || t.h[idx] == Matrix3::zeros() {
            p
        } else {
            let frame = NodeFrame::new(g0).ok_or(Error::Definiteness { node: grid.coords(idx) })?;
            let o = transfer_rotation(&frame, &g2).ok_or(Error::ChartDomain { node: grid.coords(idx) })?;
            spin_lift(&o) * p
        };
        g.push(g2);
        phi.push(rotated);
    }
    Configuration::new_unconstrained(MetricField::new(Field::from_vec(grid, g)?)?, Field::from_vec(grid, phi)?)
}

/// Inverse of [`chart_to`].
pub fn chart_from(base: &Configuration, target: &Configuration) -> Result<TangentSection> {
    let grid = base.grid();
    grid.check_same(&target.grid())?;
    let mut h = Vec::with_capacity(grid.len());
    let mut psi = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let g0 = base.metric.at(idx);
        let g2 = target.metric.at(idx);
        let dh = symmetrize(&(g2 - g0));
        let p = target.spinor[idx];
        let unrotated = if *g0 == Matrix3::identity() || dh == Matrix3::zeros() {
            p
        } else {
            let frame = NodeFrame::new(g0).ok_or(Error::Definiteness { node: grid.coords(idx) })?;
            let o = transfer_rotation(&frame, g2).ok_or(Error::ChartDomain { node: grid.coords(idx) })?;
            spin_lift(&o).adjoint() * p
        };
        h.push(dh);
        psi.push(unrotated - base.spinor[idx]);
    }
    TangentSection::new(Field::from_vec(grid, h)?, Field::from_vec(grid, psi)?)
}

/// Antisymmetric generator `R = antisym(G^{1/2} d(G^{-1/2})[h])` of the frame
/// rotation induced by moving the metric along `h`.
pub(crate) fn transfer_generator(frame: &NodeFrame, h: &Matrix3<f64>) -> Matrix3<f64> {
    let m = frame.sqrt * frame.inv_sqrt_derivative(h);
    (m - m.transpose()) * 0.5
}

/// Velocity of the stored components along the chart curve `t -> chart_to(base, t T)` at `t = 0`.
pub fn component_velocity(base: &Configuration, t: &TangentSection) -> Result<TangentSection> {
    let grid = base.grid();
    let mut frames = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        frames.push(NodeFrame::new(base.metric.at(idx)).ok_or(Error::Definiteness { node: grid.coords(idx) })?);
    }
    component_velocity_with(&frames, base, t)
}

pub(crate) fn component_velocity_with(
    frames: &[NodeFrame],
    base: &Configuration,
    t: &TangentSection,
) -> Result<TangentSection> {
    let grid = base.grid();
    grid.check_same(&t.grid())?;
    let mut psi = Vec::with_capacity(grid.len());
    for (idx, frame) in frames.iter().enumerate() {
        let r = transfer_generator(frame, &t.h[idx]);
        let a = PAIRS.map(|(i, j)| 0.5 * r[(i, j)]);
        psi.push(t.psi[idx] + bivector_action(a, &base.spinor[idx]));
    }
    TangentSection::new(t.h.clone(), Field::from_vec(grid, psi)?)
}
