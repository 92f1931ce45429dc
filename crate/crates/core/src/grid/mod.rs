//! Periodic grids on the unit 3-torus and node-valued fields.

mod calculus;
mod metric;
mod snapshot;
mod sobolev;

pub use calculus::{
    christoffel, divergence, integrate, killing_operator, l2_inner, lie_derivative_metric,
    total_volume, vector_inner, volume_element, Christoffel,
};
pub(crate) use calculus::christoffel_node;
pub use metric::{is_positive_definite, symmetrize, MetricField};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use sobolev::{sobolev_norm, sobolev_norms, spectral_derivative, SobolevOrder};

use std::ops::{Add, Index, IndexMut, Sub};

use nalgebra::{Matrix3, Vector2, Vector3};
use num_complex::Complex64;

use crate::error::{Error, NodeCoord, Result};

pub type Spinor = Vector2<Complex64>;

/// `N` nodes per axis on `[0,1)^3` with spacing `1/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::GridSize(n));
        }
        Ok(Self { n })
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Volume of one grid cell, `h^3`.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h * h
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of `(i, j, k)`, each taken modulo `N`.
    pub fn index(&self, i: isize, j: isize, k: isize) -> usize {
        let n = self.n as isize;
        let w = |a: isize| a.rem_euclid(n) as usize;
        w(i) + self.n * (w(j) + self.n * w(k))
    }

    pub fn coords(&self, idx: usize) -> NodeCoord {
        [idx % self.n, (idx / self.n) % self.n, idx / (self.n * self.n)]
    }

    /// Position of a node in `[0,1)^3`.
    pub fn position(&self, idx: usize) -> Vector3<f64> {
        let [i, j, k] = self.coords(idx);
        let h = self.spacing();
        Vector3::new(i as f64 * h, j as f64 * h, k as f64 * h)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch(self.n, other.n));
        }
        Ok(())
    }
}

/// Values that can be differentiated, interpolated and integrated node by node.
pub trait FieldValue: Copy + Add<Output = Self> + Sub<Output = Self> + Send + Sync {
    /// Number of complex components reported by [`FieldValue::component`].
    const COMPONENTS: usize;

    fn zero() -> Self;
    fn scale(self, s: f64) -> Self;
    fn component(&self, c: usize) -> Complex64;
    /// Squared flat Euclidean/Hermitian norm of the node value.
    fn norm_sqr(&self) -> f64;
    fn is_finite(&self) -> bool;
}

impl FieldValue for f64 {
    const COMPONENTS: usize = 1;
    fn zero() -> Self {
        0.0
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn component(&self, _c: usize) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
    fn norm_sqr(&self) -> f64 {
        self * self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl FieldValue for Vector3<f64> {
    const COMPONENTS: usize = 3;
    fn zero() -> Self {
        Vector3::zeros()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn component(&self, c: usize) -> Complex64 {
        Complex64::new(self[c], 0.0)
    }
    fn norm_sqr(&self) -> f64 {
        Vector3::norm_squared(self)
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl FieldValue for Matrix3<f64> {
    const COMPONENTS: usize = 9;
    fn zero() -> Self {
        Matrix3::zeros()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn component(&self, c: usize) -> Complex64 {
        Complex64::new(self[(c / 3, c % 3)], 0.0)
    }
    fn norm_sqr(&self) -> f64 {
        Matrix3::norm_squared(self)
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl FieldValue for Spinor {
    const COMPONENTS: usize = 2;
    fn zero() -> Self {
        Vector2::zeros()
    }
    fn scale(self, s: f64) -> Self {
        self * Complex64::new(s, 0.0)
    }
    fn component(&self, c: usize) -> Complex64 {
        self[c]
    }
    fn norm_sqr(&self) -> f64 {
        self[0].norm_sqr() + self[1].norm_sqr()
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// One value per grid node, stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    data: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vector3<f64>>;
pub type SymTensorField = Field<Matrix3<f64>>;
pub type SpinorField = Field<Spinor>;

impl<T> Field<T> {
    pub fn from_vec(grid: Grid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field needs {} node values, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize) -> T) -> Self {
        Self { grid, data: (0..grid.len()).map(&mut f).collect() }
    }

    /// Samples `f` at node positions.
    pub fn sample(grid: Grid, mut f: impl FnMut(Vector3<f64>) -> T) -> Self {
        Self::from_fn(grid, |idx| f(grid.position(idx)))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Field<U> {
        Field { grid: self.grid, data: self.data.iter().map(f).collect() }
    }

    /// Cyclic grid translation: the result at node `x` is `self` at `x - shift`.
    pub fn translated(&self, shift: [isize; 3]) -> Self
    where
        T: Clone,
    {
        let g = self.grid;
        Self::from_fn(g, |idx| {
            let [i, j, k] = g.coords(idx);
            let src = g.index(i as isize - shift[0], j as isize - shift[1], k as isize - shift[2]);
            self.data[src].clone()
        })
    }
}

impl<T: FieldValue> Field<T> {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![T::zero(); grid.len()] }
    }

    pub fn constant(grid: Grid, value: T) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v.scale(s))
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + b.scale(s)).collect(),
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b.scale(s);
        }
    }

    /// Flat `L^2` norm `(h^3 sum |u|^2)^{1/2}` with Euclidean node norms.
    pub fn flat_l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.data.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr().sqrt()).fold(0.0, f64::max)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(idx) => Err(Error::NonFinite { node: self.grid.coords(idx) }),
            None => Ok(()),
        }
    }

    /// Fourth-order central difference along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        Self { grid: self.grid, data: derivative(self.grid, &self.data, axis) }
    }

    pub fn derivatives(&self) -> [Self; 3] {
        [self.derivative(0), self.derivative(1), self.derivative(2)]
    }
}

impl<T> Index<usize> for Field<T> {
    type Output = T;
    fn index(&self, idx: usize) -> &T {
        &self.data[idx]
    }
}

impl<T> IndexMut<usize> for Field<T> {
    fn index_mut(&mut self, idx: usize) -> &mut T {
        &mut self.data[idx]
    }
}

/// Fourth-order periodic central difference of raw node data along `axis`.
///
/// The stencil is antisymmetric, so its transpose is its negative.
pub fn derivative<T: FieldValue>(grid: Grid, data: &[T], axis: usize) -> Vec<T> {
    let n = grid.n_per_axis();
    let stride = match axis {
        0 => 1,
        1 => n,
        2 => n * n,
        _ => panic!("axis {axis} out of range"),
    };
    let inv = n as f64 / 12.0;
    let mut out = Vec::with_capacity(data.len());
    for idx in 0..data.len() {
        let c = (idx / stride) % n;
        let base = idx - c * stride;
        let at = |d: isize| data[base + ((c as isize + d).rem_euclid(n as isize) as usize) * stride];
        let near = at(1) - at(-1);
        let far = at(2) - at(-2);
        out.push((near.scale(8.0) - far).scale(inv));
    }
    out
}

/// Adjoint of [`derivative`] with respect to the plain sum over nodes.
pub fn derivative_transpose<T: FieldValue>(grid: Grid, data: &[T], axis: usize) -> Vec<T> {
    derivative(grid, data, axis).into_iter().map(|v| v.scale(-1.0)).collect()
}

/// Accumulates `-sum_a D_a(bars[a])` into `acc`, i.e. the adjoint of the
/// map `u -> (D_0 u, D_1 u, D_2 u)` applied to `bars`.
pub(crate) fn accumulate_gradient_adjoint<T: FieldValue>(grid: Grid, acc: &mut [T], bars: &[Vec<T>; 3]) {
    for (axis, bar) in bars.iter().enumerate() {
        for (a, d) in acc.iter_mut().zip(derivative(grid, bar, axis)) {
            *a = *a - d;
        }
    }
}
