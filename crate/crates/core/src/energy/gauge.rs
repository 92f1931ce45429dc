use super::functional::{energy_and_gradient, energy_and_gradient_with, GradientResult};
use super::lambda::lambda_star_with;
use crate::error::Result;
use crate::grid::{divergence, integrate, symmetrize, Field, MetricField, VectorField};
use crate::spin::{project_orthogonal, Configuration, FrameGeometry};

/// The reference metric of the gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeContext {
    pub reference_metric: MetricField,
}

impl GaugeContext {
    pub fn new(reference_metric: MetricField) -> Self {
        Self { reference_metric }
    }

    pub fn flat(grid: crate::grid::Grid) -> Self {
        Self { reference_metric: MetricField::flat(grid) }
    }
}

/// `X = -2 (delta_{gbar} g)^sharp`, raised with the reference metric.
pub fn gauge_vector(ctx: &GaugeContext, g: &MetricField) -> Result<VectorField> {
    Ok(divergence(&ctx.reference_metric, g.field())?.scaled(-2.0))
}

/// `Q + lambda^*(X)` with the gauge vector `X` of the current metric.
pub fn gauged_gradient(ctx: &GaugeContext, config: &Configuration) -> Result<GradientResult> {
    Ok(gauged_energy_and_gradient(ctx, config)?.1)
}

pub(crate) fn gauged_energy_and_gradient(
    ctx: &GaugeContext,
    config: &Configuration,
) -> Result<(f64, GradientResult)> {
    gauged_energy_and_gradient_with(&FrameGeometry::new(config.metric())?, ctx, config)
}

pub(crate) fn gauged_energy_and_gradient_with(
    geo: &FrameGeometry,
    ctx: &GaugeContext,
    config: &Configuration,
) -> Result<(f64, GradientResult)> {
    let (e, q) = energy_and_gradient_with(geo, config)?;
    let x = gauge_vector(ctx, config.metric())?;
    let l = lambda_star_with(geo, config, &x)?;
    let q1 = q.q1.axpy(1.0, &l.h);
    let phi = config.spinor();
    let q2 = Field::from_fn(config.grid(), |i| project_orthogonal(&(q.q2[i] + l.psi[i]), &phi[i]));
    Ok((e, GradientResult { q1, q2 }))
}

/// `int tr_g(h) vol_g` for a symmetric tensor field.
pub fn integrated_trace(metric: &MetricField, h: &crate::grid::SymTensorField) -> f64 {
    let traces = Field::from_fn(metric.grid(), |i| {
        let g = metric.at(i);
        let ginv = g.try_inverse().expect("positive definite");
        g.determinant().sqrt() * (ginv * h[i]).trace()
    });
    integrate(&traces)
}

/// `Q1 - (int tr_g Q1 vol_g) / (3 int vol_g) g`, with `Q2` unchanged.
pub fn volume_normalized_gradient(config: &Configuration) -> Result<GradientResult> {
    Ok(volume_normalize(config.metric(), energy_and_gradient(config)?.1))
}

pub(crate) fn volume_normalize(metric: &MetricField, q: GradientResult) -> GradientResult {
    let vol = crate::grid::total_volume(metric);
    let mean = integrated_trace(metric, &q.q1) / (3.0 * vol);
    let q1 = Field::from_fn(metric.grid(), |i| symmetrize(&(q.q1[i] - metric.at(i) * mean)));
    GradientResult { q1, q2: q.q2 }
}

/// Empirical Lojasiewicz constant `E / ||Q||^2`; `+inf` flags a
/// vanishing gradient at positive energy, `0` is returned when both vanish.
pub fn loja_ratio(config: &Configuration) -> Result<f64> {
    let (e, q) = energy_and_gradient(config)?;
    let qn = q.l2_norm(config.metric())?;
    Ok(ratio(e, qn))
}

pub(crate) fn ratio(e: f64, q_norm: f64) -> f64 {
    if q_norm < 1e-14 {
        if e > 1e-14 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        e / (q_norm * q_norm)
    }
}
