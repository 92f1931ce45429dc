use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::grid::{
    accumulate_gradient_adjoint, christoffel_node, derivative, spectral_derivative, Field, FieldValue, Grid, Spinor,
    VectorField,
};
use crate::spin::{
    bivector_action, bivector_pairing, coordinate_covariant, Configuration, FrameGeometry,
    TangentSection, PAIRS,
};

/// Infinitesimal action of the vector field `x`:
/// `(L_X g, nabla_X phi - 1/4 dX^flat . phi)`.
pub fn lambda_star(config: &Configuration, x: &VectorField) -> Result<TangentSection> {
    lambda_star_with(&FrameGeometry::new(config.metric())?, config, x)
}

pub(crate) fn lambda_star_with(geo: &FrameGeometry, config: &Configuration, x: &VectorField) -> Result<TangentSection> {
    lambda_star_by(geo, config, x, derivative)
}

/// [`lambda_star`] with exact Fourier derivatives of `X^flat`, the
/// linearization of the trigonometric pushforward.
pub(crate) fn lambda_star_spectral(config: &Configuration, x: &VectorField) -> Result<TangentSection> {
    let geo = FrameGeometry::new(config.metric())?;
    lambda_star_by(&geo, config, x, |grid, xb, a| {
        let comps = [0, 1, 2].map(|c| {
            let data: Vec<f64> = xb.iter().map(|v| v[c]).collect();
            spectral_derivative(grid, &data, a)
        });
        (0..grid.len()).map(|i| Vector3::new(comps[0][i], comps[1][i], comps[2][i])).collect()
    })
}

fn lambda_star_by(
    geo: &FrameGeometry,
    config: &Configuration,
    x: &VectorField,
    deriv: impl Fn(Grid, &[Vector3<f64>], usize) -> Vec<Vector3<f64>>,
) -> Result<TangentSection> {
    let grid = config.grid();
    grid.check_same(&x.grid())?;
    let chi = coordinate_covariant(geo, config.spinor());
    let xb: Vec<Vector3<f64>> = (0..grid.len()).map(|i| geo.g[i] * x[i]).collect();
    let dxb = [0, 1, 2].map(|a| deriv(grid, &xb, a));
    let mut h = Vec::with_capacity(grid.len());
    let mut psi = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let gamma = christoffel_node(&geo.ginv[idx], &geo.dg_at(idx));
        let d = Matrix3::from_fn(|i, j| dxb[i][idx][j]);
        let mut cov = d;
        for i in 0..3 {
            for j in 0..3 {
                for (k, gk) in gamma.iter().enumerate() {
                    cov[(i, j)] -= gk[(i, j)] * xb[idx][k];
                }
            }
        }
        h.push(cov + cov.transpose());

        let f = &geo.frames[idx].inv_sqrt;
        let curl = f.transpose() * (d - d.transpose()) * f;
        let p = &config.spinor()[idx];
        let c = &chi[idx];
        let transport = c[0].scale(x[idx][0]) + c[1].scale(x[idx][1]) + c[2].scale(x[idx][2]);
        psi.push(transport - bivector_action(PAIRS.map(|(i, j)| 0.25 * curl[(i, j)]), p));
    }
    TangentSection::new(Field::from_vec(grid, h)?, Field::from_vec(grid, psi)?)
}

/// Exact adjoint of [`lambda_star`]: `<lambda^* X, T>_{L^2} = int g(X, lambda T) vol_g`.
pub fn lambda(config: &Configuration, t: &TangentSection) -> Result<VectorField> {
    let grid = config.grid();
    grid.check_same(&t.grid())?;
    let geo = FrameGeometry::new(config.metric())?;
    let chi = coordinate_covariant(&geo, config.spinor());
    let len = grid.len();
    let mut x_bar = vec![Vector3::zeros(); len];
    let mut xb_bar = vec![Vector3::zeros(); len];
    let mut dxb_bar: [Vec<Vector3<f64>>; 3] = std::array::from_fn(|_| vec![Vector3::zeros(); len]);

    for idx in 0..len {
        let s = geo.sqrt_det[idx];
        let ginv = &geo.ginv[idx];
        let h_bar = ginv * t.h[idx] * ginv * s;
        let psi_bar: Spinor = t.psi[idx].scale(s);
        let cov_bar = h_bar + h_bar.transpose();

        let gamma = christoffel_node(ginv, &geo.dg_at(idx));
        let mut d_bar = cov_bar;
        for (k, gk) in gamma.iter().enumerate() {
            xb_bar[idx][k] -= gk.component_mul(&cov_bar).sum();
        }

        let c = &chi[idx];
        for a in 0..3 {
            x_bar[idx][a] += c[a].dotc(&psi_bar).re;
        }
        let f = &geo.frames[idx].inv_sqrt;
        let pair = bivector_pairing(&config.spinor()[idx], &psi_bar);
        let mut curl_bar = Matrix3::zeros();
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            curl_bar[(i, j)] = -0.25 * pair[q];
        }
        let k_bar = f * curl_bar * f.transpose();
        d_bar += k_bar - k_bar.transpose();
        for i in 0..3 {
            dxb_bar[i][idx] = Vector3::new(d_bar[(i, 0)], d_bar[(i, 1)], d_bar[(i, 2)]);
        }
    }

    accumulate_gradient_adjoint(grid, &mut xb_bar, &dxb_bar);
    Field::from_vec(
        grid,
        (0..len)
            .map(|idx| {
                let xbar = x_bar[idx] + geo.g[idx] * xb_bar[idx];
                (geo.ginv[idx] * xbar).scale(1.0 / geo.sqrt_det[idx])
            })
            .collect(),
    )
}
