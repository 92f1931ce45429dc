use super::theta::rate_laws;
use crate::error::{Error, Result};

/// Outcome of integrating the comparison ODE `dE/dt = -E^{2/theta} / C`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayLemmaReport {
    pub theta: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Largest relative gap between the RK4 solution and the closed form.
    pub max_solution_error: f64,
    /// Largest relative excess of the RK4 solution over the decay bound.
    pub max_bound_violation: f64,
    /// Same for the closed-form solution itself.
    pub closed_form_violation: f64,
    /// Sharp constant `K` in `int_T^inf ||Q|| dt <= K E(T)^{1 - 1/theta}`.
    pub tail_constant: f64,
    /// Largest relative excess of the quadrature tail over that bound.
    pub max_tail_violation: f64,
    /// `(t, E_numeric, bound)` samples.
    pub samples: Vec<(f64, f64, f64)>,
}

impl DecayLemmaReport {
    pub fn max_violation(&self) -> f64 {
        self.max_solution_error.max(self.max_bound_violation).max(self.max_tail_violation)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// The comparison solution written as the bound: `E0 e^{-t/C}` at
/// `theta = 2`, else `[(p - 1)(C' + t/C)]^{-beta}` with `p = 2/theta` and
/// `C' = E0^{1-p} / (p - 1)`.
pub fn decay_bound(c: f64, theta: f64, e0: f64, t: f64) -> f64 {
    if theta == 2.0 {
        return e0 * (-t / c).exp();
    }
    let p = 2.0 / theta;
    let c_prime = e0.powf(1.0 - p) / (p - 1.0);
    let beta = theta / (2.0 - theta);
    ((p - 1.0) * (c_prime + t / c)).powf(-beta)
}

/// Exact solution of the comparison ODE in its direct form.
pub fn decay_solution(c: f64, theta: f64, e0: f64, t: f64) -> f64 {
    if theta == 2.0 {
        return e0 * (-t / c).exp();
    }
    let p = 2.0 / theta;
    (e0.powf(1.0 - p) + (p - 1.0) * t / c).powf(-1.0 / (p - 1.0))
}

pub fn verify_decay_lemma(c: f64, theta: f64, e0: f64, t_end: f64, dt: f64) -> Result<DecayLemmaReport> {
    if !(c > 0.0 && e0 > 0.0 && t_end > 0.0 && dt > 0.0 && dt <= t_end) {
        return Err(Error::Domain("need C, E0, t_end, dt positive and dt <= t_end".into()));
    }
    let (beta, gamma) = rate_laws(theta)?;
    let p = 2.0 / theta;
    let rhs = |e: f64| -e.powf(p) / c;
    let mut steps = (t_end / dt).round() as usize;
    steps += steps % 2;
    let h = t_end / steps as f64;

    let mut e = e0;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(e);
    for i in 0..steps {
        let k1 = rhs(e);
        let k2 = rhs(e + 0.5 * h * k1);
        let k3 = rhs(e + 0.5 * h * k2);
        let k4 = rhs(e + h * k3);
        e += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::Domain(format!("ODE step {} failed with E = {e}", i + 1)));
        }
        values.push(e);
    }

    let mut report = DecayLemmaReport {
        theta,
        beta,
        gamma,
        max_solution_error: 0.0,
        max_bound_violation: 0.0,
        closed_form_violation: 0.0,
        tail_constant: c.sqrt() * theta / (theta - 1.0),
        max_tail_violation: 0.0,
        samples: Vec::new(),
    };
    let sample_every = (steps / 200).max(1);
    for (i, &en) in values.iter().enumerate() {
        let t = i as f64 * h;
        let bound = decay_bound(c, theta, e0, t);
        let exact = decay_solution(c, theta, e0, t);
        report.max_solution_error = report.max_solution_error.max((en - exact).abs() / exact);
        report.max_bound_violation = report.max_bound_violation.max((en - bound).max(0.0) / bound);
        report.closed_form_violation = report.closed_form_violation.max((exact - bound).max(0.0) / bound);
        if i % sample_every == 0 {
            report.samples.push((t, en, bound));
        }
    }

    // ||Q|| = sqrt(-dE/dt); composite Simpson from each even node to t_end,
    // plus the exact remainder beyond t_end.
    let q: Vec<f64> = values.iter().map(|&v| (-rhs(v)).sqrt()).collect();
    let k = report.tail_constant;
    let exponent = 1.0 - 1.0 / theta;
    let mut tail = k * values[steps].powf(exponent);
    for i in (0..steps).step_by(2).rev() {
        tail += h / 3.0 * (q[i] + 4.0 * q[i + 1] + q[i + 2]);
        let bound = k * values[i].powf(exponent);
        report.max_tail_violation = report.max_tail_violation.max((tail - bound).max(0.0) / bound);
    }
    Ok(report)
}
