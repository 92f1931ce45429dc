use super::fit::window_indices;
use super::FitWindow;
use crate::error::{Error, Result};
use crate::flow::FlowTrace;

/// Estimates above this are clamped and flagged.
pub const THETA_CEILING: f64 = 2.1;
pub const MIN_THETA_ROWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub theta: f64,
    /// Interquartile range of the pairwise slopes.
    pub confidence_band: (f64, f64),
    pub sample_count: usize,
    /// Set when the raw estimate or band exceeded [`THETA_CEILING`].
    pub clamped: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Theil-Sen slope with its interquartile band.
pub fn theil_sen(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let mut slopes = Vec::with_capacity(x.len() * x.len() / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[j] - x[i];
            if dx != 0.0 {
                slopes.push((y[j] - y[i]) / dx);
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    slopes.sort_by(f64::total_cmp);
    Ok((quantile(&slopes, 0.5), quantile(&slopes, 0.25), quantile(&slopes, 0.75)))
}

/// Slope of `log(E - E_limit)` against `log ||Q||_{L^2}` over the
/// post-transient window of `E - E_limit`.
pub fn estimate_theta(trace: &FlowTrace, e_limit: f64) -> Result<ThetaEstimate> {
    let t: Vec<f64> = trace.rows.iter().map(|r| r.t).collect();
    let v: Vec<f64> = trace.rows.iter().map(|r| r.energy - e_limit).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = window_indices(&t, &v, FitWindow::PostTransient)
        .into_iter()
        .map(|i| &trace.rows[i])
        .filter(|r| r.energy - e_limit > 1e-13 && r.q_l2 > 1e-13)
        .map(|r| (r.q_l2.ln(), (r.energy - e_limit).ln()))
        .unzip();
    if x.len() < MIN_THETA_ROWS {
        return Err(Error::Fit(format!("{} usable rows, need {MIN_THETA_ROWS}", x.len())));
    }
    let (theta, lo, hi) = theil_sen(&x, &y)?;
    if theta <= 1.0 {
        return Err(Error::Fit(format!("slope {theta:.4} lies outside the range (1, 2]")));
    }
    let clamped = hi > THETA_CEILING;
    Ok(ThetaEstimate {
        theta: theta.min(THETA_CEILING),
        confidence_band: (lo.max(1.0 + f64::EPSILON), hi.min(THETA_CEILING)),
        sample_count: x.len(),
        clamped,
    })
}

/// `beta = theta / (2 - theta)`, `gamma = (theta - 1) / (2 - theta)`; both
/// are `+inf` at `theta = 2`, the exponential regime.
pub fn rate_laws(theta: f64) -> Result<(f64, f64)> {
    if !(theta > 1.0 && theta <= 2.0) {
        return Err(Error::Domain(format!("theta = {theta} lies outside (1, 2]")));
    }
    if theta == 2.0 {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    Ok((theta / (2.0 - theta), (theta - 1.0) / (2.0 - theta)))
}
