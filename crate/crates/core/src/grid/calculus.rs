use nalgebra::{Matrix3, Vector3};

use super::{metric::symmetrize, Field, MetricField, ScalarField, SymTensorField, VectorField};
use crate::error::Result;
use crate::spin::TangentSection;

/// Christoffel symbols per node: `gamma[k][(i, j)]` is `Gamma^k_{ij}`.
pub type Christoffel = Field<[Matrix3<f64>; 3]>;

pub(crate) fn christoffel_node(ginv: &Matrix3<f64>, dg: &[Matrix3<f64>; 3]) -> [Matrix3<f64>; 3] {
    let mut lowered = [Matrix3::zeros(); 3];
    for (l, low) in lowered.iter_mut().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                low[(i, j)] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
            }
        }
    }
    let mut out = [Matrix3::zeros(); 3];
    for (k, gk) in out.iter_mut().enumerate() {
        for (l, low) in lowered.iter().enumerate() {
            *gk += low * ginv[(k, l)];
        }
    }
    out
}

pub fn christoffel(g: &MetricField) -> Christoffel {
    let ginv = g.inverse();
    let dg = g.field().derivatives();
    Field::from_fn(g.grid(), |idx| christoffel_node(&ginv[idx], &[dg[0][idx], dg[1][idx], dg[2][idx]]))
}

/// `(delta_g h)^sharp` with `(delta_g h)_j = -g^{ik} (nabla_i h)_{kj}`.
pub fn divergence(g: &MetricField, h: &SymTensorField) -> Result<VectorField> {
    g.grid().check_same(&h.grid())?;
    let ginv = g.inverse();
    let gamma = christoffel(g);
    let dh = h.derivatives();
    Ok(Field::from_fn(g.grid(), |idx| {
        let gi = &ginv[idx];
        let ga = &gamma[idx];
        let hm = &h[idx];
        let mut low = Vector3::zeros();
        for j in 0..3 {
            let mut acc = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    let mut cov = dh[i][idx][(k, j)];
                    for l in 0..3 {
                        cov -= ga[l][(i, k)] * hm[(l, j)] + ga[l][(i, j)] * hm[(k, l)];
                    }
                    acc += gi[(i, k)] * cov;
                }
            }
            low[j] = -acc;
        }
        gi * low
    }))
}

/// `delta_g^* X^flat = (nabla_i X_j + nabla_j X_i) / 2`, which is `L_X g / 2`.
pub fn killing_operator(g: &MetricField, x: &VectorField) -> Result<SymTensorField> {
    g.grid().check_same(&x.grid())?;
    let gamma = christoffel(g);
    let xb = Field::from_fn(g.grid(), |idx| g.at(idx) * x[idx]);
    let dxb = xb.derivatives();
    Ok(Field::from_fn(g.grid(), |idx| {
        let mut cov = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut v = dxb[i][idx][j];
                for k in 0..3 {
                    v -= gamma[idx][k][(i, j)] * xb[idx][k];
                }
                cov[(i, j)] = v;
            }
        }
        symmetrize(&cov)
    }))
}

pub fn lie_derivative_metric(g: &MetricField, x: &VectorField) -> Result<SymTensorField> {
    Ok(killing_operator(g, x)?.scaled(2.0))
}

pub fn volume_element(g: &MetricField) -> ScalarField {
    g.field().map(|m| m.determinant().sqrt())
}

/// `h^3` times the node sum, accumulated in node order.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid().cell_volume() * f.iter().sum::<f64>()
}

pub fn total_volume(g: &MetricField) -> f64 {
    integrate(&volume_element(g))
}

/// `int g(h_A, h_B) vol_g + int Re<psi_A, psi_B> vol_g`.
pub fn l2_inner(g: &MetricField, a: &TangentSection, b: &TangentSection) -> Result<f64> {
    let grid = g.grid();
    grid.check_same(&a.h.grid())?;
    grid.check_same(&b.h.grid())?;
    let mut sum = 0.0;
    for idx in 0..grid.len() {
        let gm = g.at(idx);
        let ginv = gm.try_inverse().expect("positive definite matrix is invertible");
        let s = gm.determinant().sqrt();
        let tensor = (ginv * a.h[idx] * ginv).component_mul(&b.h[idx]).sum();
        let pa = a.psi[idx];
        let pb = b.psi[idx];
        let spinor = (pa[0].conj() * pb[0] + pa[1].conj() * pb[1]).re;
        sum += s * (tensor + spinor);
    }
    Ok(grid.cell_volume() * sum)
}

/// `int g(X, Y) vol_g`, the pairing on vector fields.
pub fn vector_inner(g: &MetricField, x: &VectorField, y: &VectorField) -> Result<f64> {
    let grid = g.grid();
    grid.check_same(&x.grid())?;
    grid.check_same(&y.grid())?;
    let mut sum = 0.0;
    for idx in 0..grid.len() {
        let gm = g.at(idx);
        sum += gm.determinant().sqrt() * x[idx].dot(&(gm * y[idx]));
    }
    Ok(grid.cell_volume() * sum)
}
