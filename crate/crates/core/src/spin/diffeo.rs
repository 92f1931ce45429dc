use nalgebra::{Matrix3, Vector3};

use super::clifford::spin_lift;
use super::config::Configuration;
use super::frame::NodeFrame;
use crate::error::{Error, Result};
use crate::grid::{spectral_derivative, symmetrize, Field, FieldValue, Grid, MetricField, Spinor, VectorField};

const MAX_POINTS: usize = 64;

/// Periodic tensor-product interpolation of node data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Lagrange polynomial through an even number of nodes per axis.
    Lagrange(usize),
    /// Band-limited trigonometric interpolation through all nodes.
    Trigonometric,
}

impl Default for Interpolation {
    fn default() -> Self {
        Interpolation::Lagrange(8)
    }
}

/// Interpolation weights at one point.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    points: usize,
    idx: [[usize; MAX_POINTS]; 3],
    w: [[f64; MAX_POINTS]; 3],
}

impl Interpolation {
    pub fn validate(&self, grid: Grid) -> Result<()> {
        match *self {
            Interpolation::Lagrange(p) if !(2..=16).contains(&p) || p % 2 != 0 || p > grid.n_per_axis() => {
                Err(Error::Domain(format!(
                    "Lagrange interpolation needs an even number of points in [2, min(16, N)], got {p}"
                )))
            }
            Interpolation::Trigonometric if grid.n_per_axis() > MAX_POINTS || !grid.n_per_axis().is_multiple_of(2) => {
                Err(Error::Domain(format!(
                    "trigonometric interpolation supports even N up to {MAX_POINTS}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn stencil(&self, grid: Grid, x: &Vector3<f64>) -> Stencil {
        let n = grid.n_per_axis();
        let mut st = Stencil { points: 0, idx: [[0; MAX_POINTS]; 3], w: [[0.0; MAX_POINTS]; 3] };
        for a in 0..3 {
            let s = x[a] * n as f64;
            let mut base = s.floor();
            let mut t = s - base;
            // `s` just below an integer can round `t` up to one.
            if t >= 1.0 {
                base += 1.0;
                t = 0.0;
            }
            let base = base as isize;
            match *self {
                Interpolation::Lagrange(p) => {
                    let p = p as isize;
                    let lo = -(p / 2 - 1);
                    st.points = p as usize;
                    for m in 0..p {
                        let off = lo + m;
                        let mut w = 1.0;
                        for q in 0..p {
                            if q != m {
                                let oq = lo + q;
                                w *= (t - oq as f64) / (off - oq) as f64;
                            }
                        }
                        st.w[a][m as usize] = w;
                        st.idx[a][m as usize] = (base + off).rem_euclid(n as isize) as usize;
                    }
                }
                Interpolation::Trigonometric => {
                    st.points = n;
                    let nf = n as f64;
                    for m in 0..n {
                        // Offset of the point from node `base + m`, in grid units.
                        let d = t - m as f64;
                        st.idx[a][m] = (base + m as isize).rem_euclid(n as isize) as usize;
                        st.w[a][m] = if t == 0.0 {
                            if m == 0 { 1.0 } else { 0.0 }
                        } else {
                            let arg = std::f64::consts::PI * d;
                            arg.sin() / (nf * (arg / nf).tan())
                        };
                    }
                }
            }
        }
        st
    }

    pub fn interpolate<T: FieldValue>(&self, field: &Field<T>, x: &Vector3<f64>) -> T {
        self.stencil(field.grid(), x).apply(field)
    }
}

impl Stencil {
    pub fn apply<T: FieldValue>(&self, field: &Field<T>) -> T {
        let n = field.grid().n_per_axis();
        let data = field.as_slice();
        let p = self.points;
        let mut acc = T::zero();
        for kz in 0..p {
            let mut plane = T::zero();
            for ky in 0..p {
                let row = n * (self.idx[1][ky] + n * self.idx[2][kz]);
                let mut line = T::zero();
                for kx in 0..p {
                    line = line + data[row + self.idx[0][kx]].scale(self.w[0][kx]);
                }
                plane = plane + line.scale(self.w[1][ky]);
            }
            acc = acc + plane.scale(self.w[2][kz]);
        }
        acc
    }
}

/// Orientation-preserving signed axis permutation followed by a grid shift:
/// node `c` maps to `y_a = signs[a] c_{perm[a]} + shift[a]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSymmetry {
    pub perm: [usize; 3],
    pub signs: [i8; 3],
    pub shift: [isize; 3],
}

impl GridSymmetry {
    pub fn translation(shift: [isize; 3]) -> Self {
        Self { perm: [0, 1, 2], signs: [1, 1, 1], shift }
    }

    pub fn jacobian(&self) -> Matrix3<f64> {
        let mut p = Matrix3::zeros();
        for a in 0..3 {
            p[(a, self.perm[a])] = self.signs[a] as f64;
        }
        p
    }

    fn validate(&self) -> Result<()> {
        let mut seen = [false; 3];
        for &p in &self.perm {
            if p > 2 || seen[p] {
                return Err(Error::Diffeo { node: [0, 0, 0], reason: "not a permutation".into() });
            }
            seen[p] = true;
        }
        if self.signs.iter().any(|s| s.abs() != 1) {
            return Err(Error::Diffeo { node: [0, 0, 0], reason: "signs must be +-1".into() });
        }
        if self.jacobian().determinant() < 0.0 {
            return Err(Error::Diffeo { node: [0, 0, 0], reason: "orientation reversing".into() });
        }
        Ok(())
    }

    fn source_node(&self, grid: Grid, idx: usize) -> usize {
        let y = grid.coords(idx);
        let mut c = [0isize; 3];
        for a in 0..3 {
            c[self.perm[a]] = self.signs[a] as isize * (y[a] as isize - self.shift[a]);
        }
        grid.index(c[0], c[1], c[2])
    }
}

/// `f = id + u` with a periodic displacement `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledDiffeo {
    displacement: VectorField,
    jacobian: Field<Matrix3<f64>>,
    interp: Interpolation,
}

const INVERSE_TOL: f64 = 1e-15;
const INVERSE_MAX_ITER: usize = 200;

impl ResampledDiffeo {
    pub fn identity(grid: Grid, interp: Interpolation) -> Self {
        Self {
            displacement: Field::zeros(grid),
            jacobian: Field::constant(grid, Matrix3::identity()),
            interp,
        }
    }

    /// Validates `||D u|| < 1` (spectral norm) and `det(I + D u) > 0` at every node.
    /// `D` is the fourth-order difference for Lagrange interpolation and the
    /// exact derivative of the interpolant for trigonometric interpolation.
    pub fn new(displacement: VectorField, interp: Interpolation) -> Result<Self> {
        displacement.check_finite()?;
        interp.validate(displacement.grid())?;
        let grid = displacement.grid();
        let du = match interp {
            Interpolation::Lagrange(_) => displacement.derivatives(),
            Interpolation::Trigonometric => {
                let comps: [Vec<f64>; 3] = [0, 1, 2].map(|c| displacement.iter().map(|v| v[c]).collect());
                [0, 1, 2].map(|axis| {
                    let d = comps.each_ref().map(|c| spectral_derivative(grid, c, axis));
                    Field::from_fn(grid, |i| Vector3::new(d[0][i], d[1][i], d[2][i]))
                })
            }
        };
        let mut jac = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            // Columns are derivatives along each axis.
            let d = Matrix3::from_columns(&[du[0][idx], du[1][idx], du[2][idx]]);
            let norm = d.singular_values().max();
            let j = Matrix3::identity() + d;
            if norm >= 1.0 || j.determinant() <= 0.0 {
                return Err(Error::Diffeo {
                    node: grid.coords(idx),
                    reason: format!("displacement gradient norm {norm:.3} is not below 1"),
                });
            }
            jac.push(j);
        }
        Ok(Self { displacement, jacobian: Field::from_vec(grid, jac)?, interp })
    }

    pub fn grid(&self) -> Grid {
        self.displacement.grid()
    }

    pub fn displacement(&self) -> &VectorField {
        &self.displacement
    }

    pub fn interpolator(&self) -> Interpolation {
        self.interp
    }

    /// `I + D u` at nodes.
    pub fn jacobian(&self) -> &Field<Matrix3<f64>> {
        &self.jacobian
    }

    pub fn is_identity(&self) -> bool {
        self.displacement.iter().all(|v| *v == Vector3::zeros())
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        x + self.interp.interpolate(&self.displacement, x)
    }

    /// Solves `x + u(x) = y` by fixed-point iteration.
    pub fn inverse_point(&self, y: &Vector3<f64>) -> Result<Vector3<f64>> {
        let mut x = y - self.interp.interpolate(&self.displacement, y);
        for _ in 0..INVERSE_MAX_ITER {
            let next = y - self.interp.interpolate(&self.displacement, &x);
            let step = (next - x).amax();
            x = next;
            if step <= INVERSE_TOL {
                return Ok(x);
            }
        }
        Err(Error::Diffeo { node: [0, 0, 0], reason: format!("inverse iteration stalled at y = {y:?}") })
    }

    /// `self o inner`.
    pub fn compose(&self, inner: &ResampledDiffeo) -> Result<Self> {
        let grid = self.grid();
        grid.check_same(&inner.grid())?;
        let u = Field::from_fn(grid, |idx| {
            let v = inner.displacement[idx];
            v + self.interp.interpolate(&self.displacement, &(grid.position(idx) + v))
        });
        Self::new(u, self.interp)
    }

    pub fn inverse(&self) -> Result<Self> {
        let grid = self.grid();
        let mut u = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let y = grid.position(idx);
            u.push(self.inverse_point(&y)? - y);
        }
        Self::new(Field::from_vec(grid, u)?, self.interp)
    }

    /// Time-one flow of the stationary vector field `v`, by `substeps` RK4 steps.
    pub fn exponential(v: &VectorField, substeps: usize, interp: Interpolation) -> Result<Self> {
        let grid = v.grid();
        let dt = 1.0 / substeps.max(1) as f64;
        let vel = |x: &Vector3<f64>| interp.interpolate(v, x);
        let u = Field::from_fn(grid, |idx| {
            let x0 = grid.position(idx);
            let mut x = x0;
            for _ in 0..substeps.max(1) {
                let k1 = vel(&x);
                let k2 = vel(&(x + k1 * (0.5 * dt)));
                let k3 = vel(&(x + k2 * (0.5 * dt)));
                let k4 = vel(&(x + k3 * dt));
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            }
            x - x0
        });
        Self::new(u, interp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diffeo {
    Symmetry(GridSymmetry),
    Resampled(ResampledDiffeo),
}

/// `F_* Phi`: the metric pushed by the Jacobian, the spinor carried along
/// with the spin lift of the induced frame rotation.
pub fn pushforward(diffeo: &Diffeo, config: &Configuration) -> Result<Configuration> {
    match diffeo {
        Diffeo::Symmetry(s) => push_symmetry(s, config),
        Diffeo::Resampled(r) => push_resampled(r, config),
    }
}

fn push_symmetry(s: &GridSymmetry, config: &Configuration) -> Result<Configuration> {
    s.validate()?;
    let grid = config.grid();
    let p = s.jacobian();
    let lift = if p == Matrix3::identity() { None } else { Some(spin_lift(&p)) };
    let mut g = Vec::with_capacity(grid.len());
    let mut phi = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let src = s.source_node(grid, idx);
        let m = config.metric().at(src);
        g.push(Matrix3::from_fn(|a, b| {
            (s.signs[a] * s.signs[b]) as f64 * m[(s.perm[a], s.perm[b])]
        }));
        let p0 = config.spinor()[src];
        phi.push(match &lift {
            Some(u) => u * p0,
            None => p0,
        });
    }
    Configuration::new_unconstrained(MetricField::new(Field::from_vec(grid, g)?)?, Field::from_vec(grid, phi)?)
}

fn push_resampled(r: &ResampledDiffeo, config: &Configuration) -> Result<Configuration> {
    let grid = config.grid();
    grid.check_same(&r.grid())?;
    if r.is_identity() {
        return Ok(config.clone());
    }
    let interp = r.interp;
    let mut g = Vec::with_capacity(grid.len());
    let mut phi: Vec<Spinor> = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let node = grid.coords(idx);
        let x = r.inverse_point(&grid.position(idx)).map_err(|_| Error::Diffeo {
            node,
            reason: "inverse iteration stalled".into(),
        })?;
        let st = interp.stencil(grid, &x);
        let jac = st.apply(&r.jacobian);
        let gx = st.apply(config.metric().field());
        let px = st.apply(config.spinor());
        let jinv = jac.try_inverse().ok_or(Error::Diffeo { node, reason: "singular Jacobian".into() })?;
        let pushed = symmetrize(&(jinv.transpose() * gx * jinv));
        let src = NodeFrame::new(&gx).ok_or(Error::Definiteness { node })?;
        let dst = NodeFrame::new(&pushed).ok_or(Error::Definiteness { node })?;
        let o = dst.sqrt * jac * src.inv_sqrt;
        g.push(pushed);
        phi.push(spin_lift(&o) * px);
    }
    Configuration::new_unconstrained(MetricField::new(Field::from_vec(grid, g)?)?, Field::from_vec(grid, phi)?)
}
