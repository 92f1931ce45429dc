use nalgebra::Matrix3;

use super::clifford::{bivector_action, PAIRS};
use super::config::Configuration;
use super::frame::NodeFrame;
use crate::error::{Error, Result};
use crate::grid::{derivative, Field, FieldValue, Grid, MetricField, Spinor, SpinorField};

/// Per-node metric data shared by the energy, its gradient and `lambda^*`.
pub(crate) struct FrameGeometry {
    pub grid: Grid,
    pub g: Vec<Matrix3<f64>>,
    pub ginv: Vec<Matrix3<f64>>,
    pub sqrt_det: Vec<f64>,
    pub frames: Vec<NodeFrame>,
    /// `D_a G`.
    pub dg: [Vec<Matrix3<f64>>; 3],
    /// `D_a G^{-1/2}`.
    pub dframe: [Vec<Matrix3<f64>>; 3],
}

impl FrameGeometry {
    pub fn new(metric: &MetricField) -> Result<Self> {
        let grid = metric.grid();
        let g: Vec<Matrix3<f64>> = metric.field().iter().copied().collect();
        let mut frames = Vec::with_capacity(g.len());
        for (idx, m) in g.iter().enumerate() {
            frames.push(NodeFrame::new(m).ok_or(Error::Definiteness { node: grid.coords(idx) })?);
        }
        let ginv = g.iter().map(|m| m.try_inverse().expect("positive definite")).collect();
        let sqrt_det = g.iter().map(|m| m.determinant().sqrt()).collect();
        let inv_sqrt: Vec<Matrix3<f64>> = frames.iter().map(|f| f.inv_sqrt).collect();
        let dg = [0, 1, 2].map(|a| derivative(grid, &g, a));
        let dframe = [0, 1, 2].map(|a| derivative(grid, &inv_sqrt, a));
        Ok(Self { grid, g, ginv, sqrt_det, frames, dg, dframe })
    }

    pub fn dg_at(&self, idx: usize) -> [Matrix3<f64>; 3] {
        [self.dg[0][idx], self.dg[1][idx], self.dg[2][idx]]
    }

    pub fn dframe_at(&self, idx: usize) -> [Matrix3<f64>; 3] {
        [self.dframe[0][idx], self.dframe[1][idx], self.dframe[2][idx]]
    }
}

/// Intermediate quantities of the connection at one node.
pub(crate) struct ConnectionNode {
    /// `T[a][(b, l)] = D_a G_bl + D_b G_al - D_l G_ab`.
    pub t: [Matrix3<f64>; 3],
    /// `Gamma[c][(a, b)]`.
    pub gamma: [Matrix3<f64>; 3],
    /// `W[a][(c, i)]`: coordinate components of the covariant derivative of frame vector `i` along `a`.
    pub w: [Matrix3<f64>; 3],
    /// `G F`.
    pub gf: Matrix3<f64>,
    /// `omega[a][(i, j)] = g(nabla_a e_i, e_j)`.
    pub omega: [Matrix3<f64>; 3],
}

pub(crate) fn connection_node(
    g: &Matrix3<f64>,
    ginv: &Matrix3<f64>,
    f: &Matrix3<f64>,
    dg: &[Matrix3<f64>; 3],
    df: &[Matrix3<f64>; 3],
) -> ConnectionNode {
    let mut t = [Matrix3::zeros(); 3];
    for (a, ta) in t.iter_mut().enumerate() {
        for b in 0..3 {
            for l in 0..3 {
                ta[(b, l)] = dg[a][(b, l)] + dg[b][(a, l)] - dg[l][(a, b)];
            }
        }
    }
    let mut gamma = [Matrix3::zeros(); 3];
    for (c, gc) in gamma.iter_mut().enumerate() {
        for a in 0..3 {
            for b in 0..3 {
                let mut v = 0.0;
                for l in 0..3 {
                    v += ginv[(c, l)] * t[a][(b, l)];
                }
                gc[(a, b)] = 0.5 * v;
            }
        }
    }
    let mut w = *df;
    for (a, wa) in w.iter_mut().enumerate() {
        for c in 0..3 {
            for i in 0..3 {
                let mut v = 0.0;
                for b in 0..3 {
                    v += f[(b, i)] * gamma[c][(a, b)];
                }
                wa[(c, i)] += v;
            }
        }
    }
    let gf = g * f;
    let omega = [0, 1, 2].map(|a| w[a].transpose() * gf);
    ConnectionNode { t, gamma, w, gf, omega }
}

/// `1/4 sum_{i != j} omega_ij gamma_i gamma_j phi`; only the antisymmetric
/// part of `omega` contributes.
pub(crate) fn connection_action(omega: &Matrix3<f64>, phi: &Spinor) -> Spinor {
    bivector_action(PAIRS.map(|(i, j)| 0.25 * (omega[(i, j)] - omega[(j, i)])), phi)
}

/// Coordinate covariant derivatives `chi_a = D_a phi + Omega_a phi` at every node.
pub(crate) fn coordinate_covariant(geo: &FrameGeometry, phi: &SpinorField) -> Vec<[Spinor; 3]> {
    let grid = geo.grid;
    let dphi = [0, 1, 2].map(|a| derivative(grid, phi.as_slice(), a));
    (0..grid.len())
        .map(|idx| {
            let conn = connection_node(
                &geo.g[idx],
                &geo.ginv[idx],
                &geo.frames[idx].inv_sqrt,
                &geo.dg_at(idx),
                &geo.dframe_at(idx),
            );
            [0, 1, 2].map(|a| dphi[a][idx] + connection_action(&conn.omega[a], &phi[idx]))
        })
        .collect()
}

/// `nabla_k phi` along the transferred orthonormal frame vectors `e_k`.
pub fn spin_covariant_derivative(config: &Configuration) -> Result<Field<[Spinor; 3]>> {
    let geo = FrameGeometry::new(config.metric())?;
    let chi = coordinate_covariant(&geo, config.spinor());
    Ok(Field::from_fn(config.grid(), |idx| {
        let f = &geo.frames[idx].inv_sqrt;
        let c = &chi[idx];
        [0, 1, 2].map(|k| {
            c[0].scale(f[(0, k)]) + c[1].scale(f[(1, k)]) + c[2].scale(f[(2, k)])
        })
    }))
}

/// `sum_{i<j} omega_ij gamma_i gamma_j phi` for frame components `omega`.
pub fn clifford_two_form(omega: &Field<Matrix3<f64>>, phi: &SpinorField) -> Result<SpinorField> {
    omega.grid().check_same(&phi.grid())?;
    Ok(Field::from_fn(phi.grid(), |idx| {
        let w = &omega[idx];
        bivector_action(PAIRS.map(|(i, j)| w[(i, j)]), &phi[idx])
    }))
}

