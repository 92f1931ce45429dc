mod common;

use std::f64::consts::PI;

use common::*;
use nalgebra::Vector3;
use num_complex::Complex64;
use proptest::prelude::*;
use spinflow_core::energy::*;
use spinflow_core::grid::*;
use spinflow_core::spin::*;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

fn wave(n: usize, k: f64) -> Configuration {
    let phi0 = Spinor::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    let phi = Field::sample(grid(n), |x: Vector3<f64>| phi0 * Complex64::from_polar(1.0, 2.0 * PI * k * x[0]));
    Configuration::new(MetricField::flat(grid(n)), phi).unwrap()
}

#[test]
fn flat_constant_is_critical() {
    let cfg = Configuration::flat_constant(grid(8), Spinor::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)))
        .unwrap();
    let (e, q) = energy_and_gradient(&cfg).unwrap();
    assert_eq!(e, 0.0);
    assert_eq!(q.q1.max_norm(), 0.0);
    assert_eq!(q.q2.max_norm(), 0.0);
}

#[test]
fn plane_wave_energy_matches_the_dirichlet_integral() {
    // On the flat torus E = 1/2 int |nabla phi|^2 = 1/2 (2 pi k)^2 for a unit phase wave.
    let exact = 0.5 * (2.0 * PI).powi(2);
    let err = |n| (energy(&wave(n, 1.0)).unwrap() - exact).abs() / exact;
    let (e16, e32) = (err(16), err(32));
    assert!(e32 < 1e-4, "{e32}");
    assert!((e16 / e32).log2() > 3.8, "{e16} {e32}");
}

#[test]
fn energy_scales_linearly_under_constant_rescaling() {
    let cfg = smooth_config(grid(8), 3, 0.1);
    let e = energy(&cfg).unwrap();
    for c in [0.5, 2.0, 3.0] {
        let scaled = energy(&cfg.with_scaled_metric(c).unwrap()).unwrap();
        assert!((scaled - c * e).abs() < 1e-12 * c * e, "c = {c}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let cfg = smooth_config(grid(8), 1, 0.1);
    let (_, q) = energy_and_gradient(&cfg).unwrap();
    let mut r = rng(5);
    for _ in 0..5 {
        let t = random_tangent(&cfg, &mut r, 1.0, 2);
        let pairing = l2_inner(cfg.metric(), &q.as_tangent(), &t).unwrap();
        let eps = 1e-5;
        let ep = energy(&chart_to(&cfg, &t.scaled(eps)).unwrap()).unwrap();
        let em = energy(&chart_to(&cfg, &t.scaled(-eps)).unwrap()).unwrap();
        let fd = (ep - em) / (2.0 * eps);
        assert!((fd + pairing).abs() < 1e-7 * pairing.abs(), "{fd} {pairing}");
    }
}

#[test]
fn gradient_spinor_part_is_tangent() {
    let cfg = smooth_config(grid(8), 2, 0.2);
    let q = gradient(&cfg).unwrap();
    assert!(q.as_tangent().tangency_residual(cfg.spinor()) < 1e-14);
}

#[test]
fn built_in_scaling_checks() {
    let cfg = smooth_config(grid(8), 4, 0.1);
    for c in [0.5, 2.0] {
        assert!(gradient_scaling_q1_check(&cfg, c).unwrap() < 1e-12);
        assert!(gradient_scaling_q2_check(&cfg, c).unwrap() < 1e-12);
    }
}

#[test]
fn lambda_annihilates_the_gradient_up_to_truncation() {
    let ratio = |n| {
        let cfg = smooth_config(grid(n), 3, 0.1);
        let q = gradient(&cfg).unwrap();
        let lq = lambda(&cfg, &q.as_tangent()).unwrap();
        vector_inner(cfg.metric(), &lq, &lq).unwrap().sqrt() / q.l2_norm(cfg.metric()).unwrap()
    };
    let (r8, r16) = (ratio(8), ratio(16));
    assert!(r8 / r16 > 3.5, "{r8} {r16}");
}

#[test]
fn volume_normalized_gradient_is_trace_free() {
    let cfg = smooth_config(grid(8), 6, 0.2);
    let q = volume_normalized_gradient(&cfg).unwrap();
    let plain = gradient(&cfg).unwrap();
    assert!(integrated_trace(cfg.metric(), &q.q1).abs() < 1e-14);
    assert!(integrated_trace(cfg.metric(), &plain.q1).abs() > 1e-6);
    assert_eq!(q.q2, plain.q2);
}

#[test]
fn gauge_term_vanishes_at_the_reference() {
    let cfg = smooth_config(grid(8), 7, 0.1);
    let ctx = GaugeContext::new(cfg.metric().clone());
    assert!(gauge_vector(&ctx, cfg.metric()).unwrap().max_norm() < 1e-14);
    let gauged = gauged_gradient(&ctx, &cfg).unwrap();
    let plain = gradient(&cfg).unwrap();
    assert!(gauged.q1.axpy(-1.0, &plain.q1).max_norm() < 1e-12 * plain.q1.max_norm());
    assert!(gauged.q2.axpy(-1.0, &plain.q2).max_norm() < 1e-12 * plain.q2.max_norm());
    assert!(gauge_vector(&GaugeContext::flat(cfg.grid()), cfg.metric()).unwrap().max_norm() > 1e-4);
}

#[test]
fn loja_ratio_is_finite_away_from_critical_points() {
    let r = loja_ratio(&smooth_config(grid(8), 8, 0.1)).unwrap();
    assert!(r.is_finite() && r > 0.0);
}

#[test]
fn lambda_star_is_the_infinitesimal_pushforward() {
    let cfg = smooth_config(grid(16), 4, 0.1);
    let x = smooth_vector(cfg.grid(), &mut rng(7), 1.0, 1);
    let ls = lambda_star(&cfg, &x).unwrap();
    let eps = 1e-4;
    let moved = |s: f64| {
        let f = ResampledDiffeo::exponential(&x.scaled(s), 4, Interpolation::default()).unwrap();
        chart_from(&cfg, &pushforward(&Diffeo::Resampled(f), &cfg).unwrap()).unwrap()
    };
    let d = moved(eps).axpy(-1.0, &moved(-eps)).scaled(0.5 / eps);
    let err = d.axpy(1.0, &ls);
    let rel = (l2_inner(cfg.metric(), &err, &err).unwrap() / l2_inner(cfg.metric(), &ls, &ls).unwrap()).sqrt();
    assert!(rel < 1e-2, "{rel}");
}

#[test]
fn metric_part_of_lambda_star_is_the_lie_derivative() {
    let cfg = smooth_config(grid(8), 9, 0.1);
    let x = smooth_vector(cfg.grid(), &mut rng(8), 1.0, 1);
    let ls = lambda_star(&cfg, &x).unwrap();
    let lie = lie_derivative_metric(cfg.metric(), &x).unwrap();
    let m = ls.h.axpy(1.0, &lie).max_norm().min(ls.h.axpy(-1.0, &lie).max_norm());
    assert!(m < 1e-12 * lie.max_norm(), "{m}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_is_nonnegative(seed in 0u64..1000, amp in 0.0f64..0.3) {
        prop_assert!(energy(&smooth_config(grid(4), seed, amp)).unwrap() >= 0.0);
    }

    #[test]
    fn lambda_is_the_transpose_of_lambda_star(seed in 0u64..1000) {
        let cfg = smooth_config(grid(4), seed, 0.2);
        let mut r = rng(seed + 100);
        let x = smooth_vector(cfg.grid(), &mut r, 1.0, 2);
        let t = random_tangent(&cfg, &mut r, 1.0, 2);
        let a = l2_inner(cfg.metric(), &lambda_star(&cfg, &x).unwrap(), &t).unwrap();
        let b = vector_inner(cfg.metric(), &x, &lambda(&cfg, &t).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (a.abs() + b.abs()));
    }

    #[test]
    fn energy_and_gradient_agree_with_energy(seed in 0u64..1000) {
        let cfg = smooth_config(grid(4), seed, 0.2);
        let (e, _) = energy_and_gradient(&cfg).unwrap();
        prop_assert_eq!(e, energy(&cfg).unwrap());
    }
}

#[test]
fn mismatched_grids_are_rejected() {
    let a = smooth_config(grid(4), 1, 0.1);
    let x = Field::constant(grid(8), Vector3::zeros());
    assert!(matches!(lambda_star(&a, &x), Err(spinflow_core::Error::GridMismatch(4, 8))));
}
