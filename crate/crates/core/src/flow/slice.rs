use nalgebra::Vector3;

use super::mapping::DiffeoState;
use crate::energy::{lambda, lambda_star, lambda_star_spectral};
use crate::error::{Error, Result};
use crate::grid::{vector_inner, Field, Grid, MetricField, VectorField};
use crate::spin::{chart_from, pushforward, Configuration, Diffeo, Interpolation, ResampledDiffeo};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceOptions {
    /// Target for `||lambda(Xi^{-1}(Phi))||_{L^2}`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative residual of the inner conjugate-gradient solve.
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    /// RK4 substeps of each time-one flow.
    pub exp_substeps: usize,
    pub interp: Interpolation,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            max_iterations: 50,
            cg_tolerance: 1e-12,
            cg_max_iterations: 1000,
            exp_substeps: 8,
            interp: Interpolation::Trigonometric,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SliceProjection {
    /// Accumulated diffeomorphism `psi` with `psi_* Phi~` in the slice.
    pub diffeo: DiffeoState,
    pub config: Configuration,
    /// Slice residual before the first and after every iteration.
    pub residuals: Vec<f64>,
}

/// Removes the constant and alternating-sign modes of every component, the
/// kernel of the difference operator and hence of `lambda lambda^*` at a
/// constant base.
pub fn project_neutral_modes(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let n = grid.n_per_axis();
    let len = grid.len() as f64;
    let mut out = v.clone();
    for mask in 0..8usize {
        let sign = |idx: usize| {
            let c = grid.coords(idx);
            let flips = (0..3).filter(|&a| mask >> a & 1 == 1).map(|a| c[a]).sum::<usize>();
            debug_assert!(n.is_multiple_of(2));
            if flips % 2 == 0 { 1.0 } else { -1.0 }
        };
        let mean: Vector3<f64> = (0..grid.len()).map(|i| out[i] * sign(i)).sum::<Vector3<f64>>() / len;
        for i in 0..grid.len() {
            out[i] -= mean * sign(i);
        }
    }
    out
}

/// Solves `lambda lambda^* V = r` at `base` on the complement of the
/// neutral modes. With trigonometric resampling `lambda^*` takes exact
/// Fourier derivatives of `X^flat` so that the operator matches the
/// linearized pushforward; the system is then nonsymmetric and is solved by
/// BiCGSTAB, otherwise by conjugate gradients in the vector pairing.
pub fn solve_slice_system(base: &Configuration, r: &VectorField, opts: &SliceOptions) -> Result<VectorField> {
    let b = project_neutral_modes(r);
    match opts.interp {
        Interpolation::Trigonometric => bicgstab(
            base.metric(),
            |x| Ok(project_neutral_modes(&lambda(base, &lambda_star_spectral(base, x)?)?)),
            &b,
            opts,
        ),
        Interpolation::Lagrange(_) => {
            conjugate_gradient(base.metric(), |x| Ok(project_neutral_modes(&lambda(base, &lambda_star(base, x)?)?)), &b, opts)
        }
    }
}

fn conjugate_gradient(
    metric: &MetricField,
    apply: impl Fn(&VectorField) -> Result<VectorField>,
    b: &VectorField,
    opts: &SliceOptions,
) -> Result<VectorField> {
    let b_norm = vector_inner(metric, b, b)?.sqrt();
    let mut x = Field::zeros(b.grid());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut res = b.clone();
    let mut p = res.clone();
    let mut rr = vector_inner(metric, &res, &res)?;
    for _ in 0..opts.cg_max_iterations {
        let ap = apply(&p)?;
        let pap = vector_inner(metric, &p, &ap)?;
        if !(pap > 0.0) {
            return Err(Error::LinearSolve(format!("curvature {pap:e} along search direction")));
        }
        let alpha = rr / pap;
        x = x.axpy(alpha, &p);
        res = res.axpy(-alpha, &ap);
        let rr_new = vector_inner(metric, &res, &res)?;
        if rr_new.sqrt() <= opts.cg_tolerance * b_norm {
            return Ok(x);
        }
        p = res.axpy(rr_new / rr, &p);
        rr = rr_new;
    }
    Err(Error::LinearSolve(format!("no convergence in {} iterations", opts.cg_max_iterations)))
}

fn bicgstab(
    metric: &MetricField,
    apply: impl Fn(&VectorField) -> Result<VectorField>,
    b: &VectorField,
    opts: &SliceOptions,
) -> Result<VectorField> {
    let dot = |u: &VectorField, v: &VectorField| vector_inner(metric, u, v);
    let b_norm = dot(b, b)?.sqrt();
    let mut x = Field::zeros(b.grid());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut res = b.clone();
    let shadow = b.clone();
    let mut p = res.clone();
    let mut rho = dot(&shadow, &res)?;
    for _ in 0..opts.cg_max_iterations {
        let v = apply(&p)?;
        let sv = dot(&shadow, &v)?;
        if sv == 0.0 || rho == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown".into()));
        }
        let alpha = rho / sv;
        let s = res.axpy(-alpha, &v);
        if dot(&s, &s)?.sqrt() <= opts.cg_tolerance * b_norm {
            return Ok(x.axpy(alpha, &p));
        }
        let t = apply(&s)?;
        let tt = dot(&t, &t)?;
        if tt == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown".into()));
        }
        let omega = dot(&t, &s)? / tt;
        x = x.axpy(alpha, &p).axpy(omega, &s);
        res = s.axpy(-omega, &t);
        if dot(&res, &res)?.sqrt() <= opts.cg_tolerance * b_norm {
            return Ok(x);
        }
        let rho_new = dot(&shadow, &res)?;
        let beta = rho_new / rho * alpha / omega;
        p = res.axpy(beta, &p.axpy(-omega, &v));
        rho = rho_new;
    }
    Err(Error::LinearSolve(format!("no convergence in {} iterations", opts.cg_max_iterations)))
}

fn check_base(base: &MetricField) -> Result<()> {
    let first = *base.at(0);
    if base.field().iter().any(|m| *m != first) {
        return Err(Error::Domain("slice projection needs a constant reference metric".into()));
    }
    Ok(())
}

fn slice_residual(base: &Configuration, config: &Configuration) -> Result<(VectorField, f64)> {
    let r = lambda(base, &chart_from(base, config)?)?;
    let norm = vector_inner(base.metric(), &r, &r)?.max(0.0).sqrt();
    Ok((r, norm))
}

/// Finds `psi` near the identity with `lambda_{base}(Xi^{-1}(psi_* target)) = 0`.
pub fn project_to_slice(target: &Configuration, base: &Configuration, opts: &SliceOptions) -> Result<SliceProjection> {
    let grid: Grid = base.grid();
    grid.check_same(&target.grid())?;
    check_base(base.metric())?;
    let mut psi = ResampledDiffeo::identity(grid, opts.interp);
    let mut current = target.clone();
    let (mut r, mut norm) = slice_residual(base, &current)?;
    let mut residuals = vec![norm];
    let mut iterations = 0;
    while norm > opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(Error::Slice { iterations, residual: norm });
        }
        let v = solve_slice_system(base, &r, opts)?;
        let step = ResampledDiffeo::exponential(&v, opts.exp_substeps, opts.interp)?;
        psi = step.compose(&psi)?;
        current = pushforward(&Diffeo::Resampled(psi.clone()), target)?;
        (r, norm) = slice_residual(base, &current)?;
        residuals.push(norm);
        iterations += 1;
    }
    Ok(SliceProjection { diffeo: psi, config: current, residuals })
}
