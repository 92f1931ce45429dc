mod common;

use std::f64::consts::PI;

use common::*;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use spinflow_core::grid::*;
use spinflow_core::Error;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

#[test]
fn tiny_grids_are_rejected() {
    assert!(matches!(Grid::new(3), Err(Error::GridSize(3))));
    let g = grid(4);
    assert_eq!(g.len(), 64);
    assert_eq!(g.spacing(), 0.25);
}

#[test]
fn indices_wrap_periodically() {
    let g = grid(8);
    assert_eq!(g.index(-1, 8, 3), g.index(7, 0, 3));
    for idx in [0, 17, 511] {
        let [i, j, k] = g.coords(idx);
        assert_eq!(g.index(i as isize, j as isize, k as isize), idx);
    }
}

#[test]
fn derivative_is_fourth_order() {
    let err = |n: usize| {
        let g = grid(n);
        let u = Field::sample(g, |x: Vector3<f64>| (2.0 * PI * (x[0] + 2.0 * x[2])).sin());
        let exact = Field::sample(g, |x: Vector3<f64>| 4.0 * PI * (2.0 * PI * (x[0] + 2.0 * x[2])).cos());
        u.derivative(2).axpy(-1.0, &exact).max_norm()
    };
    let (e16, e32) = (err(16), err(32));
    let order = (e16 / e32).log2();
    assert!((order - 4.0).abs() < 0.1, "observed order {order}");
}

#[test]
fn derivative_kills_constants() {
    let u = Field::constant(grid(8), 3.5);
    assert_eq!(u.derivative(0).max_norm(), 0.0);
}

#[test]
fn sobolev_norm_of_a_single_mode() {
    let g = grid(16);
    let u = Field::sample(g, |x: Vector3<f64>| (2.0 * PI * x[1]).cos());
    for s in [-3.0, 0.0, 1.0, 2.0] {
        let exact = (0.5 * (1.0 + 4.0 * PI * PI).powf(s)).sqrt();
        assert!((sobolev_norm(&u, s) - exact).abs() < 1e-12 * exact, "s = {s}");
    }
}

#[test]
fn spectral_derivative_is_exact_on_trigonometric_polynomials() {
    let g = grid(8);
    let u = Field::sample(g, |x: Vector3<f64>| (2.0 * PI * 3.0 * x[0]).sin());
    let d = spectral_derivative(g, u.as_slice(), 0);
    let exact = Field::sample(g, |x: Vector3<f64>| 6.0 * PI * (2.0 * PI * 3.0 * x[0]).cos());
    let worst = d.iter().zip(exact.iter()).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
    assert!(worst < 1e-11, "{worst}");
}

#[test]
fn constant_metric_volume() {
    let m = Matrix3::new(2.0, 0.5, 0.0, 0.5, 3.0, 0.0, 0.0, 0.0, 1.5);
    let g = MetricField::constant(grid(8), m).unwrap();
    let v = total_volume(&g);
    assert!((v - m.determinant().sqrt()).abs() < 1e-13, "{v}");
}

#[test]
fn metric_validation() {
    let g = grid(4);
    let mut bad = Field::constant(g, Matrix3::<f64>::identity());
    bad[5] = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
    assert!(matches!(MetricField::new(bad), Err(Error::Definiteness { node }) if node == g.coords(5)));
    let mut skew = Field::constant(g, Matrix3::<f64>::identity());
    skew[2][(0, 1)] = 0.1;
    assert!(matches!(MetricField::new(skew), Err(Error::Asymmetric { .. })));
    assert!(!is_positive_definite(&Matrix3::zeros()));
}

#[test]
fn flat_killing_operator_and_divergence() {
    let g = grid(32);
    let flat = MetricField::flat(g);
    let x = Field::sample(g, |p: Vector3<f64>| Vector3::new((2.0 * PI * p[1]).sin(), 0.0, 0.0));
    let k = killing_operator(&flat, &x).unwrap();
    let exact = Field::sample(g, |p: Vector3<f64>| {
        let c = PI * (2.0 * PI * p[1]).cos();
        Matrix3::new(0.0, c, 0.0, c, 0.0, 0.0, 0.0, 0.0, 0.0)
    });
    assert!(k.axpy(-1.0, &exact).max_norm() < 1e-3);
    assert!(lie_derivative_metric(&flat, &x).unwrap().axpy(-2.0, &k).max_norm() == 0.0);

    let h = Field::sample(g, |p: Vector3<f64>| Matrix3::from_diagonal(&Vector3::new((2.0 * PI * p[0]).sin(), 0.0, 0.0)));
    let d = divergence(&flat, &h).unwrap();
    let exact = Field::sample(g, |p: Vector3<f64>| Vector3::new(-2.0 * PI * (2.0 * PI * p[0]).cos(), 0.0, 0.0));
    assert!(d.axpy(-1.0, &exact).max_norm() < 1e-3);
}

#[test]
fn killing_operator_is_the_adjoint_of_divergence_up_to_truncation() {
    let defect = |n: usize| {
        let g = grid(n);
        let mut r = rng(3);
        let h = smooth_sym(g, &mut r, 0.1, 1);
        let metric = MetricField::new(h.map(|m| Matrix3::identity() + m)).unwrap();
        let x = smooth_vector(g, &mut r, 1.0, 1);
        let k = smooth_sym(g, &mut r, 1.0, 1);
        let lhs = vector_inner(&metric, &x, &divergence(&metric, &k).unwrap()).unwrap();
        let kx = killing_operator(&metric, &x).unwrap();
        let zero = Field::zeros(g);
        let a = spinflow_core::spin::TangentSection::new(kx, zero.clone()).unwrap();
        let b = spinflow_core::spin::TangentSection::new(k, zero).unwrap();
        let rhs = l2_inner(&metric, &a, &b).unwrap();
        (lhs - rhs).abs() / rhs.abs()
    };
    let (d8, d16) = (defect(8), defect(16));
    assert!(d16 < 1e-3 && d8 / d16 > 8.0, "{d8} {d16}");
}

#[test]
fn snapshots_round_trip_bit_exactly() {
    let g = grid(4);
    let mut r = rng(9);
    let c = smooth_config(g, 2, 0.1);
    let snaps = [
        Snapshot::Scalar(Field::from_fn(g, |i| (i as f64).sin())),
        Snapshot::Vector(smooth_vector(g, &mut r, 1.0, 1)),
        Snapshot::SymTensor(smooth_sym(g, &mut r, 1.0, 1)),
        Snapshot::Spinor(smooth_spinor(g, &mut r, 1.0, 1)),
        Snapshot::Configuration(c),
    ];
    for s in snaps {
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &s).unwrap();
        assert_eq!(&bytes[..SNAPSHOT_MAGIC.len()], SNAPSHOT_MAGIC);
        assert_eq!(read_snapshot(bytes.as_slice()).unwrap(), s);
    }
}

#[test]
fn corrupt_snapshots_are_rejected() {
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &Snapshot::Scalar(Field::constant(grid(4), 1.0))).unwrap();
    let mut wrong_magic = bytes.clone();
    wrong_magic[0] ^= 0xff;
    assert!(read_snapshot(wrong_magic.as_slice()).is_err());
    assert!(read_snapshot(&bytes[..bytes.len() - 3]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn derivative_transpose_is_the_adjoint(seed in 0u64..1000, axis in 0usize..3) {
        let g = grid(8);
        let mut r = rng(seed);
        let u = smooth_vector(g, &mut r, 1.0, 3);
        let v = smooth_vector(g, &mut r, 1.0, 3);
        let du = derivative(g, u.as_slice(), axis);
        let dtv = derivative_transpose(g, v.as_slice(), axis);
        let lhs: f64 = du.iter().zip(v.iter()).map(|(a, b)| a.dot(b)).sum();
        let rhs: f64 = u.iter().zip(&dtv).map(|(a, b)| a.dot(b)).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn derivative_commutes_with_translation(seed in 0u64..1000, shift in prop::array::uniform3(-8isize..8)) {
        let g = grid(8);
        let u = smooth_spinor(g, &mut rng(seed), 1.0, 2);
        for axis in 0..3 {
            prop_assert_eq!(u.translated(shift).derivative(axis), u.derivative(axis).translated(shift));
        }
    }

    #[test]
    fn sobolev_norms_increase_with_order(seed in 0u64..1000) {
        let u = smooth_sym(grid(8), &mut rng(seed), 1.0, 2);
        let norms = sobolev_norms(&u, &[-3.0, -1.0, 0.0, 1.0, 2.0]);
        prop_assert!(norms.windows(2).all(|w| w[0] <= w[1]));
        let flat = u.flat_l2_norm();
        prop_assert!((norms[2] - flat).abs() <= 1e-12 * flat);
    }

    #[test]
    fn integration_is_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
        let g = grid(4);
        let f = Field::from_fn(g, |i| ((i as f64) * 0.37 + seed as f64).sin());
        let h = Field::from_fn(g, |i| ((i as f64) * 1.3).cos());
        let lhs = integrate(&f.axpy(a, &h));
        prop_assert!((lhs - integrate(&f) - a * integrate(&h)).abs() < 1e-13);
    }
}

#[test]
fn flat_l2_matches_a_direct_sum() {
    let g = grid(4);
    let f = Field::from_fn(g, |i| i as f64);
    let direct = ((0..64).map(|i| (i * i) as f64).sum::<f64>() / 64.0).sqrt();
    assert!((f.flat_l2_norm() - direct).abs() < 1e-12);
}
