mod common;

use std::f64::consts::PI;

use common::*;
use nalgebra::{Matrix2, Matrix3, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;
use spinflow_core::energy::energy;
use spinflow_core::grid::*;
use spinflow_core::spin::*;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn standard_gammas_satisfy_the_clifford_relation() {
    let m = CliffordModel::standard();
    assert!(m.relation_residual() < 1e-15);
    assert!(m.hermiticity_residual() < 1e-15);
    let one = Matrix2::<Complex64>::identity();
    for a in 0..3 {
        for b in 0..3 {
            let ac = m.gamma[a] * m.gamma[b] + m.gamma[b] * m.gamma[a];
            let expected = if a == b { -one * c(2.0, 0.0) } else { Matrix2::zeros() };
            assert!((ac - expected).norm() < 1e-15);
        }
    }
}

#[test]
fn clifford_vector_squares_to_minus_the_length() {
    let m = CliffordModel::standard();
    let v = Vector3::new(0.3, -1.2, 0.7);
    let e = m.vector(&v);
    let expected = -Matrix2::<Complex64>::identity() * c(v.norm_squared(), 0.0);
    assert!((e * e - expected).norm() < 1e-14);
}

#[test]
fn half_turn_lifts_to_plus_minus_i_sigma() {
    let o = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    let s = spin_lift(&o);
    assert!((s.determinant() - c(1.0, 0.0)).norm() < 1e-15);
    assert!((s * s + Matrix2::identity()).norm() < 1e-15);
}

#[test]
fn frame_is_the_metric_square_root() {
    let g = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.1);
    let frame = NodeFrame::new(&g).unwrap();
    assert!((frame.sqrt * frame.sqrt - g).norm() < 1e-14);
    assert!((frame.sqrt * frame.inv_sqrt - Matrix3::identity()).norm() < 1e-14);
    assert!(NodeFrame::new(&-g).is_none());
    let h = Matrix3::new(0.2, -0.1, 0.0, -0.1, 0.4, 0.3, 0.0, 0.3, -0.5);
    let eps = 1e-6;
    let fd = (NodeFrame::new(&(g + h * eps)).unwrap().inv_sqrt - NodeFrame::new(&(g - h * eps)).unwrap().inv_sqrt)
        / (2.0 * eps);
    assert!((fd - frame.inv_sqrt_derivative(&h)).norm() < 1e-8);
}

#[test]
fn connection_term_is_skew() {
    let cfg = smooth_config(grid(8), 5, 0.2);
    let nabla = spin_covariant_derivative(&cfg).unwrap();
    let d = &cfg.spinor().derivatives();
    let worst = (0..cfg.grid().len())
        .flat_map(|idx| {
            let p = cfg.spinor()[idx];
            let f = NodeFrame::new(cfg.metric().at(idx)).unwrap().inv_sqrt;
            let n = nabla[idx];
            (0..3).map(move |k| {
                let plain = d[0][idx].scale(f[(0, k)]) + d[1][idx].scale(f[(1, k)]) + d[2][idx].scale(f[(2, k)]);
                p.dotc(&(n[k] - plain)).re.abs()
            })
        })
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-13, "{worst}");
}

#[test]
fn covariant_derivative_of_a_constant_spinor_on_the_flat_torus_vanishes() {
    let phi = Spinor::new(c(0.6, 0.0), c(0.0, 0.8));
    let cfg = Configuration::flat_constant(grid(8), phi).unwrap();
    let nabla = spin_covariant_derivative(&cfg).unwrap();
    assert_eq!(nabla.iter().flat_map(|d| d.iter().map(|v| v.norm())).fold(0.0, f64::max), 0.0);
    assert_eq!(energy(&cfg).unwrap(), 0.0);
}

#[test]
fn configurations_need_unit_spinors() {
    let g = grid(4);
    let phi = Field::constant(g, Spinor::new(c(1.0, 0.0), c(1.0, 0.0)));
    assert!(matches!(
        Configuration::new(MetricField::flat(g), phi.clone()),
        Err(spinflow_core::Error::SpinorNorm { .. })
    ));
    let mut free = Configuration::new_unconstrained(MetricField::flat(g), phi).unwrap();
    free.renormalize();
    let (lo, hi) = free.spinor_norm_range();
    assert!((lo - 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
}

#[test]
fn chart_leaves_the_domain_gracefully() {
    let cfg = smooth_config(grid(4), 1, 0.1);
    let h = Field::constant(cfg.grid(), Matrix3::identity() * -2.0);
    let t = TangentSection::new(h, Field::zeros(cfg.grid())).unwrap();
    assert!(matches!(chart_to(&cfg, &t), Err(spinflow_core::Error::ChartDomain { .. })));
}

#[test]
fn translation_pushforward_is_bit_exact() {
    let cfg = smooth_config(grid(8), 6, 0.2);
    let shift = [3, -1, 5];
    let moved = pushforward(&Diffeo::Symmetry(GridSymmetry::translation(shift)), &cfg).unwrap();
    assert_eq!(moved, cfg.translated(shift));
    let (e0, e1) = (energy(&cfg).unwrap(), energy(&moved).unwrap());
    assert!((e0 - e1).abs() < 1e-14 * e0);
}

#[test]
fn grid_rotation_preserves_the_energy() {
    let cfg = smooth_config(grid(8), 7, 0.2);
    let quarter = GridSymmetry { perm: [1, 0, 2], signs: [-1, 1, 1], shift: [0, 0, 0] };
    let moved = pushforward(&Diffeo::Symmetry(quarter), &cfg).unwrap();
    let (e0, e1) = (energy(&cfg).unwrap(), energy(&moved).unwrap());
    assert!((e0 - e1).abs() < 1e-13 * e0, "{e0} {e1}");
    let reflection = GridSymmetry { perm: [0, 1, 2], signs: [-1, 1, 1], shift: [0, 0, 0] };
    assert!(pushforward(&Diffeo::Symmetry(reflection), &cfg).is_err());
}

#[test]
fn resampled_pushforward_preserves_the_energy_up_to_discretization() {
    let defect = |n: usize| {
        let cfg = smooth_config(grid(n), 8, 0.1);
        let v = smooth_vector(cfg.grid(), &mut rng(1), 0.05, 1);
        let f = ResampledDiffeo::exponential(&v, 8, Interpolation::Trigonometric).unwrap();
        let moved = pushforward(&Diffeo::Resampled(f), &cfg).unwrap();
        let e0 = energy(&cfg).unwrap();
        ((energy(&moved).unwrap() - e0) / e0).abs()
    };
    let (d8, d16) = (defect(8), defect(16));
    assert!(d16 < 2e-3 && d16 < d8 / 6.0, "{d8} {d16}");
}

#[test]
fn exponential_of_a_constant_field_is_a_translation() {
    let g = grid(8);
    let a = Vector3::new(0.1, -0.05, 0.2);
    let f = ResampledDiffeo::exponential(&Field::constant(g, a), 4, Interpolation::default()).unwrap();
    assert!(f.displacement().axpy(-1.0, &Field::constant(g, a)).max_norm() < 1e-14);
    let y = f.apply(&Vector3::new(0.3, 0.4, 0.5));
    assert!((y - Vector3::new(0.4, 0.35, 0.7)).norm() < 1e-14);
}

#[test]
fn inverse_composes_to_the_identity() {
    let g = grid(16);
    let u = smooth_vector(g, &mut rng(4), 0.02, 1);
    let f = ResampledDiffeo::new(u, Interpolation::Trigonometric).unwrap();
    let inv = f.inverse().unwrap();
    let id = f.compose(&inv).unwrap();
    assert!(id.displacement().max_norm() < 1e-8, "{}", id.displacement().max_norm());
    let x = Vector3::new(0.21, 0.77, 0.05);
    assert!((f.apply(&f.inverse_point(&x).unwrap()) - x).norm() < 1e-10);
    assert!(ResampledDiffeo::identity(g, Interpolation::default()).is_identity());
}

#[test]
fn folding_maps_are_rejected() {
    let g = grid(8);
    let u = Field::sample(g, |x: Vector3<f64>| Vector3::new((2.0 * PI * x[0]).sin() / PI, 0.0, 0.0));
    assert!(matches!(
        ResampledDiffeo::new(u, Interpolation::default()),
        Err(spinflow_core::Error::Diffeo { .. })
    ));
}

#[test]
fn trigonometric_interpolation_reproduces_band_limited_fields() {
    let g = grid(8);
    let f = |x: &Vector3<f64>| (2.0 * PI * (x[0] + 2.0 * x[1])).cos() + (2.0 * PI * 3.0 * x[2]).sin();
    let u = Field::sample(g, |x: Vector3<f64>| f(&x));
    let p = Vector3::new(0.137, 0.52, 0.911);
    let exact = f(&p);
    assert!((Interpolation::Trigonometric.interpolate(&u, &p) - exact).abs() < 1e-12);
    let fine = Field::sample(grid(32), |x: Vector3<f64>| f(&x));
    let lagrange = Interpolation::Lagrange(8).interpolate(&fine, &p);
    assert!((lagrange - exact).abs() < 1e-5, "{}", lagrange - exact);
    assert!(Interpolation::Lagrange(16).validate(g).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spin_lift_intertwines_clifford_multiplication(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in -PI..PI,
        v in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let axis = Vector3::from(axis);
        prop_assume!(axis.norm() > 1e-3);
        let o = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner();
        let s = spin_lift(&o);
        let m = CliffordModel::standard();
        let v = Vector3::from(v);
        let lhs = s * m.vector(&v) * s.adjoint();
        prop_assert!((lhs - m.vector(&(o * v))).norm() < 1e-13);
        prop_assert!((s * s.adjoint() - Matrix2::identity()).norm() < 1e-14);
        prop_assert!((s.determinant() - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn chart_round_trip(seed in 0u64..500, amp in 0.0f64..0.3) {
        let cfg = smooth_config(grid(4), seed, 0.1);
        let t = random_tangent(&cfg, &mut rng(seed + 1), amp, 2);
        let back = chart_from(&cfg, &chart_to(&cfg, &t).unwrap()).unwrap();
        let d = back.axpy(-1.0, &t);
        prop_assert!(d.h.max_norm() < 1e-13 && d.psi.max_norm() < 1e-13);
        prop_assert!(back.tangency_residual(cfg.spinor()) < 1e-13);
    }

    #[test]
    fn translations_commute_with_the_energy(seed in 0u64..500, shift in prop::array::uniform3(-4isize..4)) {
        let cfg = smooth_config(grid(4), seed, 0.2);
        let (e0, e1) = (energy(&cfg).unwrap(), energy(&cfg.translated(shift)).unwrap());
        prop_assert!((e0 - e1).abs() <= 1e-14 * e0);
    }
}
