use nalgebra::Matrix3;

use crate::error::Result;
use crate::grid::{
    accumulate_gradient_adjoint, derivative, symmetrize, Field, FieldValue, MetricField, Spinor,
    SpinorField, SymTensorField,
};
use crate::spin::{
    bivector_pairing, connection_action, connection_node, project_orthogonal, Configuration,
    FrameGeometry, TangentSection, PAIRS,
};

/// Negative gradient `Q = (Q1, Q2)` of the energy with respect to the `L^2`
/// metric, the spinor part tangent to the unit sphere bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub q1: SymTensorField,
    pub q2: SpinorField,
}

impl GradientResult {
    pub fn as_tangent(&self) -> TangentSection {
        TangentSection { h: self.q1.clone(), psi: self.q2.clone() }
    }

    pub fn into_tangent(self) -> TangentSection {
        TangentSection { h: self.q1, psi: self.q2 }
    }

    pub fn from_tangent(t: TangentSection) -> Self {
        Self { q1: t.h, q2: t.psi }
    }

    /// `||Q||_{L^2}` measured with `metric`.
    pub fn l2_norm(&self, metric: &MetricField) -> Result<f64> {
        let t = self.as_tangent();
        Ok(crate::grid::l2_inner(metric, &t, &t)?.max(0.0).sqrt())
    }
}

struct NodeForward {
    chi: [Spinor; 3],
    density: f64,
}

fn density(s: f64, ginv: &Matrix3<f64>, chi: &[Spinor; 3]) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            acc += ginv[(a, b)] * chi[a].dotc(&chi[b]).re;
        }
    }
    0.5 * s * acc
}

fn spinor_derivatives(phi: &SpinorField) -> [Vec<Spinor>; 3] {
    [0, 1, 2].map(|a| derivative(phi.grid(), phi.as_slice(), a))
}

/// `E = 1/2 int |nabla phi|^2 vol_g` on the grid.
pub fn energy(config: &Configuration) -> Result<f64> {
    let geo = FrameGeometry::new(config.metric())?;
    let dphi = spinor_derivatives(config.spinor());
    let phi = config.spinor();
    let mut sum = 0.0;
    for idx in 0..geo.grid.len() {
        let conn = connection_node(
            &geo.g[idx],
            &geo.ginv[idx],
            &geo.frames[idx].inv_sqrt,
            &geo.dg_at(idx),
            &geo.dframe_at(idx),
        );
        let chi = [0, 1, 2].map(|a| dphi[a][idx] + connection_action(&conn.omega[a], &phi[idx]));
        sum += density(geo.sqrt_det[idx], &geo.ginv[idx], &chi);
    }
    Ok(geo.grid.cell_volume() * sum)
}

/// Energy and its negative `L^2` gradient in one pass.
pub fn energy_and_gradient(config: &Configuration) -> Result<(f64, GradientResult)> {
    energy_and_gradient_with(&FrameGeometry::new(config.metric())?, config)
}

pub(crate) fn energy_and_gradient_with(geo: &FrameGeometry, config: &Configuration) -> Result<(f64, GradientResult)> {
    let grid = geo.grid;
    let len = grid.len();
    let phi = config.spinor();
    let dphi = spinor_derivatives(phi);

    let mut g_bar = vec![Matrix3::zeros(); len];
    let mut f_bar = vec![Matrix3::zeros(); len];
    let mut phi_bar = vec![Spinor::zeros(); len];
    let mut dg_bar: [Vec<Matrix3<f64>>; 3] = std::array::from_fn(|_| vec![Matrix3::zeros(); len]);
    let mut df_bar: [Vec<Matrix3<f64>>; 3] = std::array::from_fn(|_| vec![Matrix3::zeros(); len]);
    let mut dphi_bar: [Vec<Spinor>; 3] = std::array::from_fn(|_| vec![Spinor::zeros(); len]);
    let mut sum = 0.0;

    for idx in 0..len {
        let g = &geo.g[idx];
        let ginv = &geo.ginv[idx];
        let s = geo.sqrt_det[idx];
        let f = &geo.frames[idx].inv_sqrt;
        let p = &phi[idx];
        let conn = connection_node(g, ginv, f, &geo.dg_at(idx), &geo.dframe_at(idx));
        let chi = [0, 1, 2].map(|a| dphi[a][idx] + connection_action(&conn.omega[a], p));
        let fwd = NodeForward { density: density(s, ginv, &chi), chi };
        sum += fwd.density;

        let chi = &fwd.chi;
        let chi_bar: [Spinor; 3] = [0, 1, 2].map(|a| {
            (chi[0].scale(ginv[(a, 0)]) + chi[1].scale(ginv[(a, 1)]) + chi[2].scale(ginv[(a, 2)])).scale(s)
        });
        let s_bar = fwd.density / s;
        let mut ginv_bar = Matrix3::from_fn(|a, b| 0.5 * s * chi[a].dotc(&chi[b]).re);

        let mut pb = Spinor::zeros();
        let mut omega_bar = [Matrix3::zeros(); 3];
        for a in 0..3 {
            dphi_bar[a][idx] = chi_bar[a];
            // Omega_a is anti-Hermitian.
            pb -= connection_action(&conn.omega[a], &chi_bar[a]);
            let c = bivector_pairing(p, &chi_bar[a]);
            for (q, &(i, j)) in PAIRS.iter().enumerate() {
                omega_bar[a][(i, j)] = 0.25 * c[q];
                omega_bar[a][(j, i)] = -0.25 * c[q];
            }
        }

        // omega[a] = W[a]^T (G F)
        let mut gf_bar = Matrix3::zeros();
        let mut w_bar = [Matrix3::zeros(); 3];
        for a in 0..3 {
            w_bar[a] = conn.gf * omega_bar[a].transpose();
            gf_bar += conn.w[a] * omega_bar[a];
        }
        let mut gb = gf_bar * f.transpose();
        let mut fb = g * gf_bar;

        // W[a](c, i) = DF[a](c, i) + sum_b F(b, i) Gamma[c](a, b)
        let mut gamma_bar = [Matrix3::<f64>::zeros(); 3];
        for a in 0..3 {
            df_bar[a][idx] = w_bar[a];
            for c in 0..3 {
                for i in 0..3 {
                    let wb = w_bar[a][(c, i)];
                    for b in 0..3 {
                        fb[(b, i)] += wb * conn.gamma[c][(a, b)];
                        gamma_bar[c][(a, b)] += wb * f[(b, i)];
                    }
                }
            }
        }

        // Gamma[c](a, b) = 1/2 sum_l Ginv(c, l) T[a](b, l)
        for a in 0..3 {
            for b in 0..3 {
                for l in 0..3 {
                    let mut t_bar = 0.0;
                    for c in 0..3 {
                        ginv_bar[(c, l)] += 0.5 * gamma_bar[c][(a, b)] * conn.t[a][(b, l)];
                        t_bar += 0.5 * gamma_bar[c][(a, b)] * ginv[(c, l)];
                    }
                    dg_bar[a][idx][(b, l)] += t_bar;
                    dg_bar[b][idx][(a, l)] += t_bar;
                    dg_bar[l][idx][(a, b)] -= t_bar;
                }
            }
        }

        gb += ginv * (0.5 * s * s_bar);
        gb -= ginv * ginv_bar * ginv;
        g_bar[idx] = gb;
        f_bar[idx] = fb;
        phi_bar[idx] = pb;
    }

    accumulate_gradient_adjoint(grid, &mut g_bar, &dg_bar);
    accumulate_gradient_adjoint(grid, &mut f_bar, &df_bar);
    accumulate_gradient_adjoint(grid, &mut phi_bar, &dphi_bar);

    let mut q1 = Vec::with_capacity(len);
    let mut q2 = Vec::with_capacity(len);
    for idx in 0..len {
        let frame = &geo.frames[idx];
        let p = &phi[idx];
        let pb = &phi_bar[idx];
        // Spinor components ride along with the frame transfer when g moves.
        let c = bivector_pairing(p, pb);
        let mut rot = Matrix3::zeros();
        for (q, &(i, j)) in PAIRS.iter().enumerate() {
            rot[(i, j)] = 0.25 * c[q];
            rot[(j, i)] = -0.25 * c[q];
        }
        let fb = f_bar[idx] + frame.sqrt * rot;
        let gb = symmetrize(&(g_bar[idx] + frame.inv_sqrt_derivative_adjoint(&fb)));
        let g = &geo.g[idx];
        let s = geo.sqrt_det[idx];
        q1.push(symmetrize(&(g * gb * g)).scale(-1.0 / s));
        q2.push(project_orthogonal(pb, p).scale(-1.0 / s));
    }

    Ok((
        grid.cell_volume() * sum,
        GradientResult { q1: Field::from_vec(grid, q1)?, q2: Field::from_vec(grid, q2)? },
    ))
}

pub fn gradient(config: &Configuration) -> Result<GradientResult> {
    Ok(energy_and_gradient(config)?.1)
}

/// `||Q2(c^2 g, phi) - c^{-2} Q2(g, phi)||_{L^2}` measured with `g`.
pub fn gradient_scaling_q2_check(config: &Configuration, c: f64) -> Result<f64> {
    let base = gradient(config)?;
    if c == 1.0 {
        return Ok(0.0);
    }
    let scaled = gradient(&config.with_scaled_metric(c)?)?;
    let diff = GradientResult {
        q1: Field::zeros(config.grid()),
        q2: scaled.q2.axpy(-1.0 / (c * c), &base.q2),
    };
    diff.l2_norm(config.metric())
}

/// `||Q1(c^2 g, phi) - Q1(g, phi)||_{L^2}` measured with `g`.
pub fn gradient_scaling_q1_check(config: &Configuration, c: f64) -> Result<f64> {
    let base = gradient(config)?;
    if c == 1.0 {
        return Ok(0.0);
    }
    let scaled = gradient(&config.with_scaled_metric(c)?)?;
    let diff = GradientResult { q1: scaled.q1.axpy(-1.0, &base.q1), q2: Field::zeros(config.grid()) };
    diff.l2_norm(config.metric())
}
