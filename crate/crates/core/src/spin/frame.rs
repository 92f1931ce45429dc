use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, NodeCoord, Result};
use crate::grid::{is_positive_definite, symmetrize};

/// Spectral data of one metric value `G = U diag(mu) U^T` together with
/// `G^{1/2}` and `G^{-1/2}`; the columns of `G^{-1/2}` form the transferred
/// `g`-orthonormal frame.
#[derive(Debug, Clone, Copy)]
pub struct NodeFrame {
    pub u: Matrix3<f64>,
    pub mu: Vector3<f64>,
    pub sqrt: Matrix3<f64>,
    pub inv_sqrt: Matrix3<f64>,
}

impl NodeFrame {
    pub fn new(g: &Matrix3<f64>) -> Option<Self> {
        if !is_positive_definite(g) {
            return None;
        }
        let eig = SymmetricEigen::new(*g);
        if eig.eigenvalues.iter().any(|&m| m <= 0.0) {
            return None;
        }
        let u = eig.eigenvectors;
        let mu = eig.eigenvalues;
        let scaled = |f: &dyn Fn(f64) -> f64| {
            let d = Matrix3::from_diagonal(&mu.map(f));
            symmetrize(&(u * d * u.transpose()))
        };
        Some(Self { u, mu, sqrt: scaled(&f64::sqrt), inv_sqrt: scaled(&|m: f64| 1.0 / m.sqrt()), })
    }

    fn inv_sqrt_divided_difference(&self) -> Matrix3<f64> {
        let r = self.mu.map(f64::sqrt);
        Matrix3::from_fn(|i, j| -1.0 / (r[i] * r[j] * (r[i] + r[j])))
    }

    /// Directional derivative of `G -> G^{-1/2}` along the symmetric `h`.
    pub fn inv_sqrt_derivative(&self, h: &Matrix3<f64>) -> Matrix3<f64> {
        let k = self.inv_sqrt_divided_difference();
        let inner = (self.u.transpose() * h * self.u).component_mul(&k);
        self.u * inner * self.u.transpose()
    }

    /// Adjoint of [`NodeFrame::inv_sqrt_derivative`] under the Frobenius
    /// pairing, applied to the symmetric part of `bar`.
    pub fn inv_sqrt_derivative_adjoint(&self, bar: &Matrix3<f64>) -> Matrix3<f64> {
        self.inv_sqrt_derivative(&symmetrize(bar))
    }
}

/// Relative Gram operator `A` (`g(v, w) = <A v, w>`) and its square root `B`
/// for a metric value measured against the identity reference.
pub fn bg_operators(g: &Matrix3<f64>) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    bg_operators_at(g, [0, 0, 0])
}

pub(crate) fn bg_operators_at(g: &Matrix3<f64>, node: NodeCoord) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    let frame = NodeFrame::new(g).ok_or(Error::Definiteness { node })?;
    Ok((*g, frame.sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_square_root() {
        let (a, b) = bg_operators(&Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0))).unwrap();
        assert_eq!(a, Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0)));
        assert!((b - Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 1.0))).norm() < 1e-15);
    }

    #[test]
    fn inv_sqrt_derivative_matches_difference_quotient() {
        let g = Matrix3::new(2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 1.1);
        let h = Matrix3::new(0.4, -0.2, 0.1, -0.2, 0.3, 0.5, 0.1, 0.5, -0.6);
        let f = NodeFrame::new(&g).unwrap();
        let eps = 1e-6;
        let p = NodeFrame::new(&(g + h * eps)).unwrap().inv_sqrt;
        let m = NodeFrame::new(&(g - h * eps)).unwrap().inv_sqrt;
        let fd = (p - m) / (2.0 * eps);
        assert!((fd - f.inv_sqrt_derivative(&h)).norm() < 1e-8);
    }

    #[test]
    fn non_definite_is_rejected() {
        let g = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(matches!(bg_operators(&g), Err(Error::Definiteness { .. })));
    }
}
