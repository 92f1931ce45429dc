use crate::error::{Error, Result};
use crate::flow::{FlowTrace, NormColumn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `v = A e^{-rate t}`.
    Exponential,
    /// `v = A (C + t)^{-rate}`.
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `alpha` of the exponential or `beta` of the power law.
    pub rate: f64,
    pub amplitude: f64,
    /// Time offset `C` of the power law; zero for the exponential.
    pub offset: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub rows: usize,
}

/// Rows a fit is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FitWindow {
    All,
    Range(f64, f64),
    /// Last 60% of the time span of the rows whose value exceeds `100 eps`
    /// times the first value.
    #[default]
    PostTransient,
}

pub const MIN_FIT_ROWS: usize = 10;

/// Ordinary least squares `y = a + b x`; returns `(a, b, r^2)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    (intercept, slope, r2)
}

/// Indices of the rows a window keeps; the post-transient window is the last
/// 60% of the time span of the rows above the noise floor.
pub(crate) fn window_indices(t: &[f64], v: &[f64], window: FitWindow) -> Vec<usize> {
    let positive = |i: usize| v[i] > 1e-14 && v[i].is_finite();
    match window {
        FitWindow::All => (0..t.len()).filter(|&i| positive(i)).collect(),
        FitWindow::Range(lo, hi) => (0..t.len()).filter(|&i| t[i] >= lo && t[i] <= hi && positive(i)).collect(),
        FitWindow::PostTransient => {
            let floor = 100.0 * f64::EPSILON * v.first().copied().unwrap_or(0.0).abs();
            let usable: Vec<usize> = (0..t.len()).filter(|&i| v[i] > floor && positive(i)).collect();
            let (Some(&first), Some(&last)) = (usable.first(), usable.last()) else {
                return usable;
            };
            let start = t[last] - 0.6 * (t[last] - t[first]);
            usable.into_iter().filter(|&i| t[i] >= start).collect()
        }
    }
}

fn select(t: &[f64], v: &[f64], window: FitWindow) -> Result<(Vec<f64>, Vec<f64>)> {
    let idx = window_indices(t, v, window);
    if idx.len() < MIN_FIT_ROWS {
        return Err(Error::Fit(format!("window holds {} usable rows, need {MIN_FIT_ROWS}", idx.len())));
    }
    Ok((idx.iter().map(|&i| t[i]).collect(), idx.iter().map(|&i| v[i]).collect()))
}

fn exponential(t: &[f64], v: &[f64]) -> DecayFit {
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let (a, b, r2) = linear_regression(t, &logs);
    DecayFit {
        model: DecayModel::Exponential,
        rate: -b,
        amplitude: a.exp(),
        offset: 0.0,
        r_squared: r2,
        window: (t[0], t[t.len() - 1]),
        rows: t.len(),
    }
}

fn power_law_with_offset(t: &[f64], logs: &[f64], c: f64) -> (f64, f64, f64) {
    let x: Vec<f64> = t.iter().map(|s| (c + s).ln()).collect();
    linear_regression(&x, logs)
}

/// Power law with the offset `C` chosen by golden-section search on the
/// residual over `log C`, with `C` at most ten window spans: larger offsets
/// only reparametrize an exponential.
fn power_law(t: &[f64], v: &[f64]) -> DecayFit {
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let span = (t[t.len() - 1] - t[0]).max(f64::MIN_POSITIVE);
    // C must keep C + t positive on the window.
    let shift = (-t[0]).max(0.0);
    let misfit = |lc: f64| 1.0 - power_law_with_offset(t, &logs, shift + lc.exp()).2;
    let (mut lo, mut hi) = ((span * 1e-6).ln(), (span * 10.0).ln());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (misfit(x1), misfit(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = misfit(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = misfit(x2);
        }
    }
    let c = shift + (0.5 * (lo + hi)).exp();
    let (a, b, r2) = power_law_with_offset(t, &logs, c);
    DecayFit {
        model: DecayModel::PowerLaw,
        rate: -b,
        amplitude: a.exp(),
        offset: c,
        r_squared: r2,
        window: (t[0], t[t.len() - 1]),
        rows: t.len(),
    }
}

/// Fits one model to `v(t)` on the window.
pub fn fit_model(t: &[f64], v: &[f64], window: FitWindow, model: DecayModel) -> Result<DecayFit> {
    let (t, v) = select(t, v, window)?;
    Ok(match model {
        DecayModel::Exponential => exponential(&t, &v),
        DecayModel::PowerLaw => power_law(&t, &v),
    })
}

/// Fits both models and keeps the one with the larger `r^2`, preferring the
/// exponential on ties.
pub fn fit_decay(t: &[f64], v: &[f64], window: FitWindow) -> Result<DecayFit> {
    let (t, v) = select(t, v, window)?;
    let exp = exponential(&t, &v);
    let pow = power_law(&t, &v);
    Ok(if pow.r_squared > exp.r_squared { pow } else { exp })
}

/// Decay fit of `E - E_limit` along the trace.
pub fn fit_energy_decay(trace: &FlowTrace, e_limit: f64, window: FitWindow) -> Result<DecayFit> {
    let t: Vec<f64> = trace.rows.iter().map(|r| r.t).collect();
    let v: Vec<f64> = trace.rows.iter().map(|r| r.energy - e_limit).collect();
    fit_decay(&t, &v, window)
}

/// Decay fit of one gradient-norm column.
pub fn fit_gradient_decay(trace: &FlowTrace, column: NormColumn, window: FitWindow) -> Result<DecayFit> {
    let t: Vec<f64> = trace.rows.iter().map(|r| r.t).collect();
    let v: Vec<f64> = trace.rows.iter().map(|r| r.norm(column)).collect();
    fit_decay(&t, &v, window)
}

/// `int_{t_i}^{t_end} ||Q||^2 dt` for every row, by the trapezoid rule.
pub fn dissipation_tail(trace: &FlowTrace) -> Vec<f64> {
    let rows = &trace.rows;
    let mut tail = vec![0.0; rows.len()];
    for i in (0..rows.len().saturating_sub(1)).rev() {
        let w = (rows[i + 1].t - rows[i].t) * 0.5 * (rows[i].q_l2.powi(2) + rows[i + 1].q_l2.powi(2));
        tail[i] = tail[i + 1] + w;
    }
    tail
}

/// `E_limit` by Aitken extrapolation over three equally spaced times in the
/// last tenth of the trace, clamped to `[0, E_final]`.
pub fn estimate_energy_limit(trace: &FlowTrace) -> Result<f64> {
    let rows = &trace.rows;
    if rows.len() < 3 {
        return Err(Error::Fit("need at least three rows to extrapolate".into()));
    }
    let t_end = rows[rows.len() - 1].t;
    let tau = 0.05 * (t_end - rows[0].t);
    let at = |t: f64| -> f64 {
        let j = rows.partition_point(|r| r.t < t).clamp(1, rows.len() - 1);
        let (a, b) = (&rows[j - 1], &rows[j]);
        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        a.energy + s * (b.energy - a.energy)
    };
    let (e1, e2, e3) = (at(t_end - 2.0 * tau), at(t_end - tau), rows[rows.len() - 1].energy);
    let denom = e1 + e3 - 2.0 * e2;
    let limit = if denom > 0.0 { e3 - (e3 - e2).powi(2) / denom } else { e3 };
    Ok(limit.clamp(0.0, e3.max(0.0)))
}
