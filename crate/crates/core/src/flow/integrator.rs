//! Adaptive explicit stepping: Bogacki-Shampine 3(2) with a stability cap,
//! or second-order Runge-Kutta-Chebyshev with a stage count sized to the
//! spectral radius.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Embedded 3(2) pair; `dt` is capped by the stability interval.
    #[default]
    BogackiShampine,
    /// Damped Chebyshev recursion whose real stability interval grows like
    /// `0.65 s^2` with the stage count `s`.
    Chebyshev,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::BogackiShampine => "bs23",
            Scheme::Chebyshev => "rkc",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bs23" => Ok(Scheme::BogackiShampine),
            "rkc" => Ok(Scheme::Chebyshev),
            other => Err(Error::Domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Settings shared by every flow.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt_initial: f64,
    pub dt_max: f64,
    /// Target for the scaled RMS local error estimate.
    pub rel_tol: f64,
    pub t_end: f64,
    pub renormalize_spinor: bool,
    /// Integration stops once `||Q||_{L^2}` falls below this value.
    pub stop_threshold: f64,
    /// Retries with halved `dt` before a step is given up.
    pub max_retries: usize,
    /// `dt <= stability_safety / lambda_max`; the real stability interval of
    /// the pair reaches about 2.5.
    pub stability_safety: f64,
    /// Accepted steps between refreshes of the `lambda_max` estimate.
    pub stability_refresh: usize,
    /// Power iterations per `lambda_max` estimate.
    pub power_iterations: usize,
    /// Times the integrator lands on exactly.
    pub checkpoints: Vec<f64>,
    /// Sobolev order `k` of the `Qhk` trace column.
    pub hk_order: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::BogackiShampine,
            dt_initial: 1e-4,
            dt_max: 0.05,
            rel_tol: 1e-6,
            t_end: 1.0,
            renormalize_spinor: true,
            stop_threshold: 0.0,
            max_retries: 30,
            stability_safety: 2.0,
            stability_refresh: 100,
            power_iterations: 30,
            checkpoints: Vec::new(),
            hk_order: 2.0,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.dt_initial > 0.0 && self.dt_initial <= self.dt_max) {
            return bad(format!("need 0 < dt_initial <= dt_max, got {} and {}", self.dt_initial, self.dt_max));
        }
        if !(self.rel_tol > 1e-12 && self.rel_tol < 1e-2) {
            return bad(format!("rel_tol must lie in (1e-12, 1e-2), got {}", self.rel_tol));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.stability_safety > 0.0) || self.max_retries == 0 {
            return bad("stability_safety and max_retries must be positive".into());
        }
        Ok(())
    }
}

/// An autonomous-or-not system `y' = f(t, y)` on a flat state vector.
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[f64]) -> Result<Vec<f64>>;

    /// Maps an accepted state back onto its constraint set and returns the
    /// size of the correction.
    fn project(&mut self, _y: &mut [f64]) -> f64 {
        0.0
    }

    /// Scalar rate integrated alongside the state, evaluated at the most
    /// recent `rhs` call.
    fn integrand(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    /// Error estimate of the accepted step per unit of time, scaled by the
    /// tolerance (at most 1).
    pub error: f64,
    pub projection: f64,
    pub retries: usize,
    /// Right-hand side evaluations spent on the step, retries included.
    pub evaluations: usize,
    /// Integral of [`OdeSystem::integrand`] over the step, with the stage
    /// weights of the scheme (endpoint trapezoid for Chebyshev steps).
    pub quadrature: f64,
}

/// Integrator state: time, solution, first-same-as-last slope and the
/// current step proposal.
///
/// Error control is per unit step: the local error estimate divided by `dt`
/// must stay below `rel_tol`, so accumulated errors scale like
/// `rel_tol` times the integrated duration.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub cfg: IntegratorConfig,
    pub t: f64,
    pub y: Vec<f64>,
    k1: Option<Vec<f64>>,
    k1_rate: f64,
    dt: f64,
    lambda_max: Option<f64>,
    since_refresh: usize,
}

fn axpy(y: &[f64], a: &[(f64, &Vec<f64>)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in a {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += c * v;
        }
    }
    out
}

impl Stepper {
    pub fn new(cfg: IntegratorConfig, t0: f64, y0: Vec<f64>) -> Self {
        let dt = cfg.dt_initial;
        Self { cfg, t: t0, y: y0, k1: None, k1_rate: 0.0, dt, lambda_max: None, since_refresh: 0 }
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.lambda_max
    }

    /// Slope at the current state, evaluated on demand.
    pub fn slope<S: OdeSystem>(&mut self, sys: &mut S) -> Result<&Vec<f64>> {
        if self.k1.is_none() {
            self.k1 = Some(sys.rhs(self.t, &self.y)?);
            self.k1_rate = sys.integrand();
        }
        Ok(self.k1.as_ref().unwrap())
    }

    /// Replaces the state, e.g. after an external correction.
    pub fn reset_state(&mut self, y: Vec<f64>) {
        self.y = y;
        self.k1 = None;
        self.k1_rate = 0.0;
    }

    /// Largest magnitude eigenvalue of the Jacobian by power iteration on
    /// finite-difference Jacobian-vector products.
    pub fn estimate_lambda_max<S: OdeSystem>(&mut self, sys: &mut S) -> Result<f64> {
        let f0 = self.slope(sys)?.clone();
        let n = self.y.len();
        let ynorm = self.y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        // Deterministic start vector with content at all scales.
        let mut v: Vec<f64> = (0..n).map(|i| (((i * 7919) % 104729) as f64 / 104729.0) - 0.5).collect();
        let mut lambda = 0.0;
        for _ in 0..self.cfg.power_iterations {
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if vn == 0.0 {
                break;
            }
            let eps = 1e-7 * ynorm / vn;
            let yp: Vec<f64> = self.y.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let fp = sys.rhs(self.t, &yp)?;
            let jv: Vec<f64> = fp.iter().zip(&f0).map(|(a, b)| (a - b) / eps).collect();
            let jn = jv.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = jn / vn;
            v = jv;
        }
        self.lambda_max = Some(lambda);
        self.since_refresh = 0;
        Ok(lambda)
    }

    fn stability_cap(&self) -> f64 {
        match self.lambda_max {
            Some(l) if l > 0.0 => self.cfg.stability_safety / l,
            _ => f64::INFINITY,
        }
    }

    /// One accepted step, never passing `t_limit`, which is landed on exactly.
    pub fn step<S: OdeSystem>(&mut self, sys: &mut S, t_limit: f64) -> Result<StepReport> {
        let mut evaluations = 0;
        if self.lambda_max.is_none() || self.since_refresh >= self.cfg.stability_refresh {
            self.estimate_lambda_max(sys)?;
            evaluations += self.cfg.power_iterations;
        }
        if self.k1.is_none() {
            evaluations += 1;
        }
        let k1 = self.slope(sys)?.clone();
        let cap = match self.cfg.scheme {
            Scheme::BogackiShampine => self.stability_cap(),
            Scheme::Chebyshev => f64::INFINITY,
        };
        let mut dt = self.dt.min(self.cfg.dt_max).min(cap);
        let mut retries = 0;
        loop {
            let remaining = t_limit - self.t;
            let lands = dt >= remaining * (1.0 - 1e-12);
            if lands {
                dt = remaining;
            }
            let attempt = match self.cfg.scheme {
                Scheme::BogackiShampine => self.attempt(sys, &k1, dt),
                Scheme::Chebyshev => self.attempt_chebyshev(sys, &k1, dt),
            };
            evaluations += match self.cfg.scheme {
                Scheme::BogackiShampine => 3,
                Scheme::Chebyshev => self.chebyshev_stages(dt),
            };
            match attempt {
                Ok(Attempt { y: mut y_new, k_new: k4, rate_new, error: err, quadrature }) if err <= 1.0 => {
                    let t_new = if lands { t_limit } else { self.t + dt };
                    let projection = sys.project(&mut y_new);
                    let (k4, rate_new) = if projection > 0.0 {
                        evaluations += 1;
                        (sys.rhs(t_new, &y_new)?, sys.integrand())
                    } else {
                        (k4, rate_new)
                    };
                    self.t = t_new;
                    self.y = y_new;
                    self.k1 = Some(k4);
                    self.k1_rate = rate_new;
                    self.since_refresh += 1;
                    let (safety, lo, hi) = match self.cfg.scheme {
                        Scheme::BogackiShampine => (0.9, 0.2, 5.0),
                        Scheme::Chebyshev => (0.8, 0.1, 2.0),
                    };
                    let exponent = match self.cfg.scheme {
                        Scheme::BogackiShampine => -0.5,
                        Scheme::Chebyshev => -1.0 / 3.0,
                    };
                    let grow = if err > 0.0 { (safety * err.powf(exponent)).clamp(lo, hi) } else { hi };
                    if !lands || dt >= self.dt {
                        self.dt = dt * grow;
                    }
                    return Ok(StepReport { t: t_new, dt, error: err, projection, retries, evaluations, quadrature });
                }
                Ok(_) | Err(Error::Definiteness { .. }) | Err(Error::Diffeo { .. }) | Err(Error::NonFinite { .. }) => {
                    retries += 1;
                    if retries > self.cfg.max_retries {
                        return Err(Error::FlowAbort {
                            t: self.t,
                            reason: format!("step rejected {} times (last dt {dt:e})", self.cfg.max_retries),
                        });
                    }
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Stage count giving a real stability interval past `dt * lambda_max`.
    fn chebyshev_stages(&self, dt: f64) -> usize {
        let rho = self.lambda_max.unwrap_or(0.0) * 1.2;
        (2 + (1.0 + 1.54 * dt * rho).sqrt() as usize).min(400)
    }

    /// Second-order Runge-Kutta-Chebyshev step with damping `2/13`; the
    /// error estimate combines the end-point slopes.
    fn attempt_chebyshev<S: OdeSystem>(
        &self,
        sys: &mut S,
        k1: &Vec<f64>,
        dt: f64,
    ) -> Result<Attempt> {
        let s = self.chebyshev_stages(dt);
        let w0 = 1.0 + 2.0 / (13.0 * (s * s) as f64);
        // T_j, T_j', T_j'' at w0.
        let mut t = vec![0.0; s + 1];
        let mut dtj = vec![0.0; s + 1];
        let mut ddt = vec![0.0; s + 1];
        t[0] = 1.0;
        t[1] = w0;
        dtj[1] = 1.0;
        for j in 2..=s {
            t[j] = 2.0 * w0 * t[j - 1] - t[j - 2];
            dtj[j] = 2.0 * t[j - 1] + 2.0 * w0 * dtj[j - 1] - dtj[j - 2];
            ddt[j] = 4.0 * dtj[j - 1] + 2.0 * w0 * ddt[j - 1] - ddt[j - 2];
        }
        let w1 = dtj[s] / ddt[s];
        let mut b = vec![0.0; s + 1];
        for j in 2..=s {
            b[j] = ddt[j] / (dtj[j] * dtj[j]);
        }
        b[0] = b[2];
        b[1] = b[2];

        let y0 = &self.y;
        let t0 = self.t;
        let mu1 = b[1] * w1;
        let mut prev2 = y0.clone();
        let mut prev = axpy(y0, &[(mu1 * dt, k1)]);
        let (mut c2, mut c1) = (0.0, mu1);
        for j in 2..=s {
            let mu = 2.0 * b[j] * w0 / b[j - 1];
            let nu = -b[j] / b[j - 2];
            let mut_ = 2.0 * b[j] * w1 / b[j - 1];
            let gam = -(1.0 - b[j - 1] * t[j - 1]) * mut_;
            let f = sys.rhs(t0 + c1 * dt, &prev)?;
            let next: Vec<f64> = (0..y0.len())
                .map(|i| {
                    (1.0 - mu - nu) * y0[i] + mu * prev[i] + nu * prev2[i] + mut_ * dt * f[i] + gam * dt * k1[i]
                })
                .collect();
            let c = mu * c1 + nu * c2 + mut_ + gam;
            prev2 = std::mem::replace(&mut prev, next);
            c2 = c1;
            c1 = c;
        }
        let y_new = prev;
        let k_new = sys.rhs(t0 + dt, &y_new)?;
        let rate_new = sys.integrand();
        let mut acc = 0.0;
        for i in 0..y0.len() {
            let e = 0.8 * (y0[i] - y_new[i]) + 0.4 * dt * (k1[i] + k_new[i]);
            let sc = self.cfg.rel_tol * (1.0 + y0[i].abs().max(y_new[i].abs()));
            acc += (e / sc).powi(2);
        }
        let err = (acc / y0.len() as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NonFinite { node: [0, 0, 0] });
        }
        let quadrature = 0.5 * dt * (self.k1_rate + rate_new);
        Ok(Attempt { y: y_new, k_new, rate_new, error: err, quadrature })
    }

    fn attempt<S: OdeSystem>(&self, sys: &mut S, k1: &Vec<f64>, dt: f64) -> Result<Attempt> {
        let y = &self.y;
        let t = self.t;
        let k2 = sys.rhs(t + 0.5 * dt, &axpy(y, &[(0.5 * dt, k1)]))?;
        let r2 = sys.integrand();
        let k3 = sys.rhs(t + 0.75 * dt, &axpy(y, &[(0.75 * dt, &k2)]))?;
        let r3 = sys.integrand();
        let y_new = axpy(y, &[(2.0 / 9.0 * dt, k1), (1.0 / 3.0 * dt, &k2), (4.0 / 9.0 * dt, &k3)]);
        let k4 = sys.rhs(t + dt, &y_new)?;
        let rate_new = sys.integrand();
        let quadrature = dt * (2.0 / 9.0 * self.k1_rate + 1.0 / 3.0 * r2 + 4.0 / 9.0 * r3);
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = dt * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 0.125 * k4[i]);
            let sc = self.cfg.rel_tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            acc += (e / sc).powi(2);
        }
        let err = (acc / y.len() as f64).sqrt() / dt;
        if !err.is_finite() {
            return Err(Error::NonFinite { node: [0, 0, 0] });
        }
        Ok(Attempt { y: y_new, k_new: k4, rate_new, error: err, quadrature })
    }
}

/// A trial step before acceptance.
struct Attempt {
    y: Vec<f64>,
    k_new: Vec<f64>,
    rate_new: f64,
    error: f64,
    quadrature: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);

    impl OdeSystem for Decay {
        fn rhs(&mut self, _t: f64, y: &[f64]) -> Result<Vec<f64>> {
            Ok(y.iter().map(|v| -self.0 * v).collect())
        }
    }

    #[test]
    fn linear_decay_is_accurate_and_lands_on_end() {
        let cfg = IntegratorConfig { rel_tol: 1e-8, dt_max: 0.1, t_end: 2.0, ..Default::default() };
        let mut s = Stepper::new(cfg, 0.0, vec![1.0, 2.0]);
        let mut sys = Decay(3.0);
        while s.t < 2.0 {
            s.step(&mut sys, 2.0).unwrap();
        }
        assert_eq!(s.t, 2.0);
        assert!((s.y[0] - (-6.0f64).exp()).abs() < 1e-7);
        assert!((s.lambda_max().unwrap() - 3.0).abs() < 1e-4);
    }

    #[test]
    fn stiff_decay_respects_stability_cap() {
        let cfg = IntegratorConfig { rel_tol: 1e-3, dt_max: 1.0, t_end: 1.0, ..Default::default() };
        let mut s = Stepper::new(cfg, 0.0, vec![1.0]);
        let mut sys = Decay(1000.0);
        while s.t < 1.0 {
            let r = s.step(&mut sys, 1.0).unwrap();
            assert!(r.dt <= 2.0 / 1000.0 * 1.0001);
        }
        assert!(s.y[0].abs() < 1e-10);
    }

    #[test]
    fn chebyshev_takes_long_stable_steps() {
        let cfg = IntegratorConfig {
            scheme: Scheme::Chebyshev,
            rel_tol: 1e-6,
            dt_max: 1.0,
            t_end: 1.0,
            ..Default::default()
        };
        let mut s = Stepper::new(cfg, 0.0, vec![1.0, 1.0]);
        struct Split;
        impl OdeSystem for Split {
            fn rhs(&mut self, _t: f64, y: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![-2000.0 * y[0], -2.0 * y[1]])
            }
        }
        let mut evaluations = 0;
        while s.t < 1.0 {
            evaluations += s.step(&mut Split, 1.0).unwrap().evaluations;
        }
        // The capped 3(2) pair needs about 3000 evaluations here.
        assert!(evaluations < 1500, "{evaluations} evaluations");
        assert!((s.y[1] - (-2.0f64).exp()).abs() < 5e-5, "{}", s.y[1]);
        assert!(s.y[0].abs() < 1e-6);
    }

    #[test]
    fn chebyshev_is_exact_for_time_linear_forcing() {
        let cfg = IntegratorConfig { scheme: Scheme::Chebyshev, rel_tol: 1e-4, dt_max: 0.5, t_end: 1.0, ..Default::default() };
        struct Ramp;
        impl OdeSystem for Ramp {
            fn rhs(&mut self, t: f64, _y: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![t])
            }
        }
        let mut s = Stepper::new(cfg, 0.0, vec![0.0]);
        while s.t < 1.0 {
            s.step(&mut Ramp, 1.0).unwrap();
        }
        assert!((s.y[0] - 0.5).abs() < 1e-12, "{}", s.y[0]);
    }
}
