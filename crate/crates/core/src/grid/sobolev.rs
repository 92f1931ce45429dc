use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, FieldValue};

/// Order `s` of the Bessel-potential norm; any finite real.
pub type SobolevOrder = f64;

/// `||u||_{H^s}^2 = sum_k (1 + |2 pi k|^2)^s |u_hat(k)|^2` with
/// `u_hat = DFT(u) / N^3`, summed over all components.
pub fn sobolev_norm<T: FieldValue>(u: &Field<T>, s: SobolevOrder) -> f64 {
    sobolev_norms(u, &[s])[0]
}

/// [`sobolev_norm`] for several orders from one transform.
pub fn sobolev_norms<T: FieldValue>(u: &Field<T>, orders: &[SobolevOrder]) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.n_per_axis();
    let len = grid.len();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];

    let norm = 1.0 / len as f64;
    let mut power = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for c in 0..T::COMPONENTS {
        for (b, v) in buf.iter_mut().zip(u.iter()) {
            *b = v.component(c);
        }
        for stride in [1, n, n * n] {
            transform_lines(&mut buf, n, stride, fft.as_ref(), &mut line, &mut scratch);
        }
        for (p, b) in power.iter_mut().zip(&buf) {
            *p += (b * norm).norm_sqr();
        }
    }

    let freq = |m: usize| m.min(n - m) as f64;
    let symbol: Vec<f64> = (0..len)
        .map(|idx| {
            let [i, j, k] = grid.coords(idx);
            let k2 = freq(i).powi(2) + freq(j).powi(2) + freq(k).powi(2);
            1.0 + 4.0 * std::f64::consts::PI.powi(2) * k2
        })
        .collect();
    orders
        .iter()
        .map(|&s| power.iter().zip(&symbol).map(|(p, w)| w.powf(s) * p).sum::<f64>().sqrt())
        .collect()
}

/// Applies the 1D transform to every grid line with the given stride.
fn transform_lines(
    buf: &mut [Complex64],
    n: usize,
    stride: usize,
    fft: &dyn Fft<f64>,
    line: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    for start in 0..buf.len() {
        if !(start / stride).is_multiple_of(n) {
            continue;
        }
        for (m, l) in line.iter_mut().enumerate() {
            *l = buf[start + m * stride];
        }
        fft.process_with_scratch(line, scratch);
        for (m, l) in line.iter().enumerate() {
            buf[start + m * stride] = *l;
        }
    }
}

/// Exact derivative along `axis` of the trigonometric interpolant of real
/// node data; the Nyquist mode is dropped.
pub fn spectral_derivative(grid: super::Grid, data: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n_per_axis();
    let stride = [1, n, n * n][axis];
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_lines(&mut buf, n, stride, forward.as_ref(), &mut line, &mut scratch);
    let two_pi = 2.0 * std::f64::consts::PI;
    for (idx, b) in buf.iter_mut().enumerate() {
        let m = (idx / stride) % n;
        let k = if 2 * m < n {
            m as f64
        } else if 2 * m == n {
            0.0
        } else {
            m as f64 - n as f64
        };
        *b *= Complex64::new(0.0, two_pi * k / n as f64);
    }
    transform_lines(&mut buf, n, stride, inverse.as_ref(), &mut line, &mut scratch);
    buf.iter().map(|b| b.re).collect()
}
