//! Initial data: named recipes around the flat metric with a constant spinor.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use spinflow_core::flow::{project_to_slice, SliceOptions};
use spinflow_core::grid::{
    is_positive_definite, write_snapshot, Field, Grid, MetricField, Snapshot, Spinor, VectorField,
};
use spinflow_core::spin::{Configuration, TangentSection};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("amplitude {amplitude} is too large: the perturbed metric is not positive definite at node {node:?}")]
    NotPositive { amplitude: f64, node: [usize; 3] },

    #[error("invalid recipe parameter: {0}")]
    Parameter(String),

    #[error(transparent)]
    Core(#[from] spinflow_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recipe {
    FlatConstant,
    /// `g = (1 + amplitude sin(2 pi mode x_1)) Id` with the constant spinor.
    MetricBump { amplitude: f64, mode: u32 },
    /// Flat metric, `phi = e^{2 pi i k x_1} phi_0`.
    SpinorWave { k: u32 },
    /// Band-limited Gaussian perturbation of metric and spinor with
    /// frequencies `|k| <= cutoff`, scaled to the given sup norm.
    RandomSmooth { amplitude: f64, cutoff: u32 },
    /// [`Recipe::RandomSmooth`] with cutoff 2, projected to the slice
    /// through the flat constant configuration.
    SliceRandom { amplitude: f64 },
}

impl Recipe {
    pub fn name(&self) -> &'static str {
        match self {
            Recipe::FlatConstant => "flat_constant",
            Recipe::MetricBump { .. } => "metric_bump",
            Recipe::SpinorWave { .. } => "spinor_wave",
            Recipe::RandomSmooth { .. } => "random_smooth",
            Recipe::SliceRandom { .. } => "slice_random",
        }
    }
}

/// The constant unit spinor every recipe starts from.
pub fn reference_spinor() -> Spinor {
    Spinor::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8))
}

pub fn flat_constant(grid: Grid) -> Configuration {
    Configuration::flat_constant(grid, reference_spinor()).expect("reference spinor has unit norm")
}

/// Sum of `a_k cos(2 pi k.x) + b_k sin(2 pi k.x)` over one representative of
/// each pair `+-k` with `0 < |k| <= cutoff`, for `components` independent
/// fields, all scaled by one common factor to sup norm `amplitude`.
fn band_limited(grid: Grid, rng: &mut ChaCha8Rng, components: usize, cutoff: u32, amplitude: f64) -> Vec<Vec<f64>> {
    let n = grid.n_per_axis();
    let c = cutoff as i64;
    let mut modes = Vec::new();
    for kx in -c..=c {
        for ky in -c..=c {
            for kz in -c..=c {
                let k = [kx, ky, kz];
                let positive = k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0);
                if positive && kx * kx + ky * ky + kz * kz <= c * c {
                    modes.push(k);
                }
            }
        }
    }
    // Plane waves factor per axis.
    let phase = |k: i64, i: usize| {
        let arg = 2.0 * PI * ((k * i as i64).rem_euclid(n as i64)) as f64 / n as f64;
        Complex64::new(arg.cos(), arg.sin())
    };
    let mut fields = Vec::with_capacity(components);
    for _ in 0..components {
        let coeffs: Vec<(f64, f64)> = modes
            .iter()
            .map(|_| (StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
            .collect();
        let values: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let [i, j, l] = grid.coords(idx);
                modes
                    .iter()
                    .zip(&coeffs)
                    .map(|(k, (a, b))| {
                        let e = phase(k[0], i) * phase(k[1], j) * phase(k[2], l);
                        a * e.re + b * e.im
                    })
                    .sum()
            })
            .collect();
        fields.push(values);
    }
    let sup = fields.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if sup > 0.0 { amplitude / sup } else { 0.0 };
    for f in &mut fields {
        for v in f.iter_mut() {
            *v *= scale;
        }
    }
    fields
}

fn random_smooth(grid: Grid, seed: u64, amplitude: f64, cutoff: u32) -> Result<Configuration, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = band_limited(grid, &mut rng, 6, cutoff, amplitude);
    let psi = band_limited(grid, &mut rng, 4, cutoff, amplitude);
    let mut g = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let c = |k: usize| h[k][idx];
        let m = Matrix3::identity() + Matrix3::new(c(0), c(1), c(2), c(1), c(3), c(4), c(2), c(4), c(5));
        if !is_positive_definite(&m) {
            return Err(SynthError::NotPositive { amplitude, node: grid.coords(idx) });
        }
        g.push(m);
    }
    let phi0 = reference_spinor();
    let phi = Field::from_fn(grid, |idx| {
        let p = phi0 + Spinor::new(Complex64::new(psi[0][idx], psi[1][idx]), Complex64::new(psi[2][idx], psi[3][idx]));
        p.unscale(p.norm())
    });
    Ok(Configuration::new(MetricField::new(Field::from_vec(grid, g)?)?, phi)?)
}

/// Builds the initial configuration of a recipe; the same seed gives a
/// bit-identical result.
pub fn synthesize_initial(recipe: Recipe, grid: Grid, seed: u64) -> Result<Configuration, SynthError> {
    match recipe {
        Recipe::FlatConstant => Ok(flat_constant(grid)),
        Recipe::MetricBump { amplitude, mode } => {
            if amplitude.abs() >= 1.0 {
                return Err(SynthError::NotPositive { amplitude, node: [0, 0, 0] });
            }
            let g = Field::sample(grid, |x: Vector3<f64>| {
                Matrix3::identity() * (1.0 + amplitude * (2.0 * PI * mode as f64 * x[0]).sin())
            });
            Ok(Configuration::new(MetricField::new(g)?, Field::constant(grid, reference_spinor()))?)
        }
        Recipe::SpinorWave { k } => {
            let phi0 = reference_spinor();
            let phi = Field::sample(grid, |x: Vector3<f64>| {
                let arg = 2.0 * PI * k as f64 * x[0];
                phi0 * Complex64::new(arg.cos(), arg.sin())
            });
            Ok(Configuration::new(MetricField::flat(grid), phi)?)
        }
        Recipe::RandomSmooth { amplitude, cutoff } => {
            if cutoff == 0 {
                return Err(SynthError::Parameter("cutoff must be positive".into()));
            }
            random_smooth(grid, seed, amplitude, cutoff)
        }
        Recipe::SliceRandom { amplitude } => {
            let target = random_smooth(grid, seed, amplitude, 2)?;
            Ok(project_to_slice(&target, &flat_constant(grid), &SliceOptions::default())?.config)
        }
    }
}

/// Band-limited random vector field with sup norm `amplitude`.
pub fn smooth_vector(grid: Grid, seed: u64, amplitude: f64, cutoff: u32) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = band_limited(grid, &mut rng, 3, cutoff, amplitude);
    Field::from_fn(grid, |i| Vector3::new(c[0][i], c[1][i], c[2][i]))
}

/// Band-limited random tangent section at `config`, spinor part orthogonal
/// to the spinor of `config`.
pub fn smooth_tangent(config: &Configuration, seed: u64, amplitude: f64, cutoff: u32) -> TangentSection {
    let grid = config.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = band_limited(grid, &mut rng, 6, cutoff, amplitude);
    let p = band_limited(grid, &mut rng, 4, cutoff, amplitude);
    let h = Field::from_fn(grid, |i| {
        let c = |k: usize| h[k][i];
        Matrix3::new(c(0), c(1), c(2), c(1), c(3), c(4), c(2), c(4), c(5))
    });
    let psi = Field::from_fn(grid, |i| Spinor::new(Complex64::new(p[0][i], p[1][i]), Complex64::new(p[2][i], p[3][i])));
    let mut t = TangentSection::new(h, psi).expect("fields share the grid");
    t.project_tangent(config.spinor());
    t
}

/// SHA-256 of the snapshot encoding, as lowercase hex.
pub fn configuration_checksum(config: &Configuration) -> String {
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &Snapshot::Configuration(config.clone())).expect("writing to memory cannot fail");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
