use nalgebra::Matrix3;

use super::{Field, Grid, SymTensorField};
use crate::error::{Error, Result};

/// Positive definiteness by leading principal minors.
pub fn is_positive_definite(m: &Matrix3<f64>) -> bool {
    let m1 = m[(0, 0)];
    let m2 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let m3 = m.determinant();
    m1 > 0.0 && m2 > 0.0 && m3 > 0.0
}

pub fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// A field of symmetric positive-definite matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    g: SymTensorField,
}

impl MetricField {
    pub fn new(g: SymTensorField) -> Result<Self> {
        let grid = g.grid();
        for (idx, m) in g.iter().enumerate() {
            let node = grid.coords(idx);
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { node });
            }
            if *m != m.transpose() {
                return Err(Error::Asymmetric { node });
            }
            if !is_positive_definite(m) {
                return Err(Error::Definiteness { node });
            }
        }
        Ok(Self { g })
    }

    pub fn flat(grid: Grid) -> Self {
        Self { g: Field::constant(grid, Matrix3::identity()) }
    }

    pub fn constant(grid: Grid, m: Matrix3<f64>) -> Result<Self> {
        Self::new(Field::constant(grid, m))
    }

    pub fn grid(&self) -> Grid {
        self.g.grid()
    }

    pub fn field(&self) -> &SymTensorField {
        &self.g
    }

    pub fn into_field(self) -> SymTensorField {
        self.g
    }

    pub fn at(&self, idx: usize) -> &Matrix3<f64> {
        &self.g[idx]
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.g.scaled(s))
    }

    /// `g + t h` with exact symmetry restored node by node.
    pub fn perturbed(&self, t: f64, h: &SymTensorField) -> Result<Self> {
        Self::new(Field::from_fn(self.grid(), |i| symmetrize(&(self.g[i] + h[i] * t))))
    }

    pub fn inverse(&self) -> SymTensorField {
        self.g.map(|m| symmetrize(&m.try_inverse().expect("positive definite matrix is invertible")))
    }

    pub fn translated(&self, shift: [isize; 3]) -> Self {
        Self { g: self.g.translated(shift) }
    }
}
