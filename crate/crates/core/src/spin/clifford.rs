use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::grid::Spinor;

pub type SpinMatrix = Matrix2<Complex64>;

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Three 2x2 complex matrices acting as Clifford multiplication by an
/// orthonormal frame, with `gamma_i gamma_j + gamma_j gamma_i = -2 delta_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordModel {
    pub gamma: [SpinMatrix; 3],
}

impl Default for CliffordModel {
    fn default() -> Self {
        Self::standard()
    }
}

impl CliffordModel {
    /// `gamma_j = i sigma_j` with the Pauli matrices `sigma_j`.
    pub fn standard() -> Self {
        let z = c(0.0, 0.0);
        Self {
            gamma: [
                Matrix2::new(z, c(0.0, 1.0), c(0.0, 1.0), z),
                Matrix2::new(z, c(1.0, 0.0), c(-1.0, 0.0), z),
                Matrix2::new(c(0.0, 1.0), z, z, c(0.0, -1.0)),
            ],
        }
    }

    /// Largest entry of `gamma_i gamma_j + gamma_j gamma_i + 2 delta_ij` over all pairs.
    pub fn relation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut m = self.gamma[i] * self.gamma[j] + self.gamma[j] * self.gamma[i];
                if i == j {
                    m += SpinMatrix::identity() * c(2.0, 0.0);
                }
                worst = worst.max(m.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// Largest entry of `gamma_i + gamma_i^dagger`.
    pub fn hermiticity_residual(&self) -> f64 {
        self.gamma
            .iter()
            .map(|g| (g + g.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Clifford multiplication by the frame vector with components `v`.
    pub fn vector(&self, v: &Vector3<f64>) -> SpinMatrix {
        self.gamma[0] * c(v[0], 0.0) + self.gamma[1] * c(v[1], 0.0) + self.gamma[2] * c(v[2], 0.0)
    }

    /// `gamma_i gamma_j` for the three pairs `(0,1), (0,2), (1,2)`.
    pub fn bivectors(&self) -> [SpinMatrix; 3] {
        [
            self.gamma[0] * self.gamma[1],
            self.gamma[0] * self.gamma[2],
            self.gamma[1] * self.gamma[2],
        ]
    }
}

/// Index pairs `i < j` in the order used by [`CliffordModel::bivectors`].
pub(crate) const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Bivector products of the standard model, cached.
pub(crate) fn standard_bivectors() -> &'static [SpinMatrix; 3] {
    use std::sync::OnceLock;
    static B: OnceLock<[SpinMatrix; 3]> = OnceLock::new();
    B.get_or_init(|| CliffordModel::standard().bivectors())
}

/// `sum_{i<j} a_ij gamma_i gamma_j phi` for the standard model, with `a`
/// given on the pairs of [`PAIRS`].
pub(crate) fn bivector_action(a: [f64; 3], phi: &Spinor) -> Spinor {
    let b = standard_bivectors();
    (b[0] * phi) * c(a[0], 0.0) + (b[1] * phi) * c(a[1], 0.0) + (b[2] * phi) * c(a[2], 0.0)
}

/// `Re<gamma_i gamma_j phi, chi>` on the pairs of [`PAIRS`].
pub(crate) fn bivector_pairing(phi: &Spinor, chi: &Spinor) -> [f64; 3] {
    let b = standard_bivectors();
    let mut out = [0.0; 3];
    for (o, m) in out.iter_mut().zip(b) {
        *o = (m * phi).dotc(chi).re;
    }
    out
}

/// Lift of a rotation to SU(2) on the branch continuous from the identity:
/// rotation by `theta` about the unit axis `n` maps to
/// `cos(theta/2) - i sin(theta/2) n.sigma`, so that
/// `lift(O) gamma(v) lift(O)^-1 = gamma(O v)`.
pub fn spin_lift(o: &Matrix3<f64>) -> SpinMatrix {
    let q = rotation_quaternion(o);
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix2::new(c(w, -z), c(-y, -x), c(y, -x), c(w, z))
}

/// Unit quaternion `(w, x, y, z)` with `w >= 0` of a rotation matrix
/// (Shepperd's method, renormalized).
fn rotation_quaternion(o: &Matrix3<f64>) -> [f64; 4] {
    let tr = o.trace();
    let d = [o[(0, 0)], o[(1, 1)], o[(2, 2)]];
    let mut q = if tr >= d[0].max(d[1]).max(d[2]) {
        let w = 0.5 * (1.0 + tr).sqrt();
        let f = 0.25 / w;
        [w, (o[(2, 1)] - o[(1, 2)]) * f, (o[(0, 2)] - o[(2, 0)]) * f, (o[(1, 0)] - o[(0, 1)]) * f]
    } else if d[0] >= d[1] && d[0] >= d[2] {
        let x = 0.5 * (1.0 + d[0] - d[1] - d[2]).sqrt();
        let f = 0.25 / x;
        [(o[(2, 1)] - o[(1, 2)]) * f, x, (o[(0, 1)] + o[(1, 0)]) * f, (o[(0, 2)] + o[(2, 0)]) * f]
    } else if d[1] >= d[2] {
        let y = 0.5 * (1.0 - d[0] + d[1] - d[2]).sqrt();
        let f = 0.25 / y;
        [(o[(0, 2)] - o[(2, 0)]) * f, (o[(0, 1)] + o[(1, 0)]) * f, y, (o[(1, 2)] + o[(2, 1)]) * f]
    } else {
        let z = 0.5 * (1.0 - d[0] - d[1] + d[2]).sqrt();
        let f = 0.25 / z;
        [(o[(1, 0)] - o[(0, 1)]) * f, (o[(0, 2)] + o[(2, 0)]) * f, (o[(1, 2)] + o[(2, 1)]) * f, z]
    };
    if q[0] < 0.0 {
        q.iter_mut().for_each(|v| *v = -*v);
    }
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm != 1.0 {
        q.iter_mut().for_each(|v| *v /= norm);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_model_satisfies_relations() {
        let m = CliffordModel::standard();
        assert!(m.relation_residual() <= 1e-15);
        assert!(m.hermiticity_residual() <= 1e-15);
    }

    #[test]
    fn lift_of_identity_is_identity() {
        assert_eq!(spin_lift(&Matrix3::identity()), SpinMatrix::identity());
    }

    #[test]
    fn lift_intertwines_clifford_multiplication() {
        let m = CliffordModel::standard();
        let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
        for theta in [0.1, 1.0, 2.5, 3.1] {
            let o = *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), theta)
                .matrix();
            let u = spin_lift(&o);
            let v = Vector3::new(0.2, 0.7, -1.1);
            let lhs = u * m.vector(&v) * u.adjoint();
            let rhs = m.vector(&(o * v));
            assert!((lhs - rhs).norm() < 1e-14, "theta {theta}");
            assert!((u * u.adjoint() - SpinMatrix::identity()).norm() < 1e-14);
        }
    }
}
