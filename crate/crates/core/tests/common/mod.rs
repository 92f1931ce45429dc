#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinflow_core::grid::{Field, Grid, MetricField, Spinor, SpinorField, SymTensorField, VectorField};
use spinflow_core::spin::{Configuration, TangentSection};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A few random low Fourier modes per component, `|k|_inf <= kmax`.
pub struct Modes {
    terms: Vec<(Vector3<f64>, f64, f64)>,
}

impl Modes {
    pub fn random(rng: &mut ChaCha8Rng, count: usize, kmax: i32) -> Self {
        let terms = (0..count)
            .map(|_| {
                let k = Vector3::new(
                    rng.random_range(-kmax..=kmax) as f64,
                    rng.random_range(-kmax..=kmax) as f64,
                    rng.random_range(-kmax..=kmax) as f64,
                );
                (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI))
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.terms.iter().map(|(k, a, p)| a * (2.0 * PI * k.dot(x) + p).cos()).sum::<f64>()
            / (self.terms.len() as f64).sqrt()
    }
}

pub fn smooth_sym(grid: Grid, rng: &mut ChaCha8Rng, amp: f64, kmax: i32) -> SymTensorField {
    let modes: Vec<Modes> = (0..6).map(|_| Modes::random(rng, 3, kmax)).collect();
    Field::sample(grid, |x| {
        let v: Vec<f64> = modes.iter().map(|m| amp * m.eval(&x)).collect();
        Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5])
    })
}

pub fn smooth_vector(grid: Grid, rng: &mut ChaCha8Rng, amp: f64, kmax: i32) -> VectorField {
    let modes: Vec<Modes> = (0..3).map(|_| Modes::random(rng, 3, kmax)).collect();
    Field::sample(grid, |x| Vector3::new(amp * modes[0].eval(&x), amp * modes[1].eval(&x), amp * modes[2].eval(&x)))
}

pub fn smooth_spinor(grid: Grid, rng: &mut ChaCha8Rng, amp: f64, kmax: i32) -> SpinorField {
    let modes: Vec<Modes> = (0..4).map(|_| Modes::random(rng, 3, kmax)).collect();
    Field::sample(grid, |x| {
        Spinor::new(
            Complex64::new(amp * modes[0].eval(&x), amp * modes[1].eval(&x)),
            Complex64::new(amp * modes[2].eval(&x), amp * modes[3].eval(&x)),
        )
    })
}

/// Smooth configuration with metric `I + a h` and spinor a normalized
/// perturbation of a constant.
pub fn smooth_config(grid: Grid, seed: u64, amp: f64) -> Configuration {
    let mut r = rng(seed);
    let h = smooth_sym(grid, &mut r, amp, 1);
    let g = MetricField::new(h.map(|m| Matrix3::identity() + m)).unwrap();
    let base = Spinor::new(Complex64::new(0.6, 0.2), Complex64::new(-0.3, 0.714_142_842_854_285));
    let pert = smooth_spinor(grid, &mut r, amp, 1);
    let phi = Field::from_fn(grid, |i| {
        let p = base + pert[i];
        p / Complex64::new(p.norm(), 0.0)
    });
    Configuration::new(g, phi).unwrap()
}

/// Random tangent direction at `config` with the spinor part orthogonal to `phi`.
pub fn random_tangent(config: &Configuration, rng: &mut ChaCha8Rng, amp: f64, kmax: i32) -> TangentSection {
    let grid = config.grid();
    let mut t = TangentSection::new(smooth_sym(grid, rng, amp, kmax), smooth_spinor(grid, rng, amp, kmax)).unwrap();
    t.project_tangent(config.spinor());
    t
}
