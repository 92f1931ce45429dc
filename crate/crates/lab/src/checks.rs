//! Invariant batteries over every module, grouped into suites.

use std::collections::BTreeSet;
use std::error::Error as StdError;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use spinflow_core::analysis::{
    estimate_theta, fit_energy_decay, fit_gradient_decay, rate_laws, verify_decay_lemma, DecayModel, FitWindow,
};
use spinflow_core::energy::{
    energy, energy_and_gradient, gauge_vector, gauged_gradient, gradient, gradient_scaling_q1_check,
    gradient_scaling_q2_check, integrated_trace, lambda, lambda_star, loja_ratio, volume_normalized_gradient,
    GaugeContext,
};
use spinflow_core::flow::{
    configuration_distance, mapping_rhs, project_to_slice, reconstruct_gauged, run, Flow, FlowKind, FlowTrace,
    IntegratorConfig, NormColumn, SliceOptions, TraceRow,
};
use spinflow_core::grid::{
    christoffel, divergence, killing_operator, l2_inner, sobolev_norm, sobolev_norms, total_volume, vector_inner,
    volume_element, Field, Grid, MetricField, VectorField,
};
use spinflow_core::spin::{
    bg_operators, chart_from, chart_to, clifford_two_form, pushforward, spin_covariant_derivative, CliffordModel,
    Configuration, Diffeo, GridSymmetry, Interpolation, ResampledDiffeo, TangentSection,
};

use crate::config::parse_config;
use crate::experiment::run_experiment_in;
use crate::synth::{configuration_checksum, flat_constant, smooth_tangent, smooth_vector, synthesize_initial, Recipe};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Gradient,
    Flows,
    Decay,
    All,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Gradient => "gradient",
            Suite::Flows => "flows",
            Suite::Decay => "decay",
            Suite::All => "all",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "algebra" => Ok(Suite::Algebra),
            "gradient" => Ok(Suite::Gradient),
            "flows" => Ok(Suite::Flows),
            "decay" => Ok(Suite::Decay),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite `{other}`")),
        }
    }
}

/// Every operation of the library and the lab; `check(all)` must reach each.
pub const OPERATIONS: &[&str] = &[
    "christoffel",
    "divergence",
    "killing_operator",
    "volume_element",
    "l2_inner",
    "sobolev_norm",
    "bg_operators",
    "spin_covariant_derivative",
    "clifford_two_form",
    "chart_to",
    "pushforward",
    "energy",
    "gradient",
    "gradient_scaling_q2_check",
    "lambda_star",
    "lambda",
    "gauge_vector",
    "gauged_gradient",
    "volume_normalized_gradient",
    "loja_ratio",
    "step",
    "run",
    "mapping_rhs",
    "reconstruct_gauged",
    "project_to_slice",
    "fit_energy_decay",
    "estimate_theta",
    "rate_laws",
    "verify_decay_lemma",
    "fit_gradient_decay",
    "parse_config",
    "synthesize_initial",
    "run_experiment",
    "check",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub runtime: Duration,
    /// Error text when the check could not be evaluated.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub suite: Suite,
    pub results: Vec<CheckResult>,
    pub covered: BTreeSet<&'static str>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = format!("# suite {}\n# name status value threshold runtime_s\n", self.suite.name());
        for r in &self.results {
            let status = if r.passed { "pass" } else { "FAIL" };
            let _ = write!(s, "{} {status} {:.6e} {:.6e} {:.3}", r.name, r.value, r.threshold, r.runtime.as_secs_f64());
            if !r.note.is_empty() {
                let _ = write!(s, " # {}", r.note);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "# overall {}", if self.passed() { "pass" } else { "FAIL" });
        s
    }
}

type Outcome = Result<Measured, Box<dyn StdError>>;

/// A measured value and the bound it was held to.
pub struct Measured {
    value: f64,
    threshold: f64,
    passed: bool,
}

fn at_most(value: f64, threshold: f64) -> Outcome {
    Ok(Measured { value, threshold, passed: value <= threshold })
}

fn at_least(value: f64, threshold: f64) -> Outcome {
    Ok(Measured { value, threshold, passed: value >= threshold })
}

/// Shared inputs of a suite run.
pub struct Context {
    pub clifford: CliffordModel,
}

struct Check {
    name: &'static str,
    ops: &'static [&'static str],
    run: fn(&Context) -> Outcome,
}

pub fn check(suite: Suite) -> CheckReport {
    check_with(suite, &Context { clifford: CliffordModel::standard() })
}

/// Runs a suite against the given context, e.g. a modified Clifford model.
pub fn check_with(suite: Suite, ctx: &Context) -> CheckReport {
    let checks: Vec<Check> = match suite {
        Suite::Algebra => algebra(),
        Suite::Gradient => gradient_suite(),
        Suite::Flows => flows(),
        Suite::Decay => decay(),
        Suite::All => [algebra(), gradient_suite(), flows(), decay()].into_iter().flatten().collect(),
    };
    let mut results = Vec::with_capacity(checks.len() + 1);
    let mut covered = BTreeSet::new();
    for c in &checks {
        let start = Instant::now();
        let outcome = (c.run)(ctx);
        let runtime = start.elapsed();
        covered.extend(c.ops.iter().copied());
        results.push(match outcome {
            Ok(m) => CheckResult {
                name: c.name,
                passed: m.passed,
                value: m.value,
                threshold: m.threshold,
                runtime,
                note: String::new(),
            },
            Err(e) => CheckResult {
                name: c.name,
                passed: false,
                value: f64::NAN,
                threshold: f64::NAN,
                runtime,
                note: e.to_string().replace('\n', "; "),
            },
        });
    }
    if suite == Suite::All {
        covered.insert("check");
        let missing: Vec<&str> = OPERATIONS.iter().copied().filter(|op| !covered.contains(op)).collect();
        results.push(CheckResult {
            name: "operation_coverage",
            passed: missing.is_empty(),
            value: missing.len() as f64,
            threshold: 0.0,
            runtime: Duration::ZERO,
            note: if missing.is_empty() { String::new() } else { format!("not exercised: {}", missing.join(", ")) },
        });
    }
    CheckReport { suite, results, covered }
}

fn grid(n: usize) -> Grid {
    Grid::new(n).expect("grid sizes used by the checks are valid")
}

fn random_config(n: usize, seed: u64, amplitude: f64) -> Result<Configuration, Box<dyn StdError>> {
    Ok(synthesize_initial(Recipe::RandomSmooth { amplitude, cutoff: 2 }, grid(n), seed)?)
}

fn tangent_norm(g: &MetricField, t: &TangentSection) -> Result<f64, Box<dyn StdError>> {
    Ok(l2_inner(g, t, t)?.max(0.0).sqrt())
}

fn max_entry(m: &Matrix3<f64>) -> f64 {
    m.abs().max()
}

fn random_spd(seed: u64) -> Matrix3<f64> {
    let v = smooth_vector(grid(4), seed, 1.0, 1);
    let a = Matrix3::from_columns(&[v[1], v[7], v[13]]);
    Matrix3::identity() + a * a.transpose()
}

// ---------------------------------------------------------------- algebra

fn algebra() -> Vec<Check> {
    vec![
        Check { name: "clifford_relation", ops: &[], run: |ctx| at_most(ctx.clifford.relation_residual(), 1e-15) },
        Check { name: "gamma_anti_hermitian", ops: &[], run: |ctx| at_most(ctx.clifford.hermiticity_residual(), 1e-15) },
        Check {
            name: "clifford_unit_vector_isometry",
            ops: &[],
            run: |ctx| {
                let phi = crate::synth::reference_spinor();
                let mut worst: f64 = 0.0;
                for seed in 0..20 {
                    let v = smooth_vector(grid(4), seed, 1.0, 1)[5];
                    let e = ctx.clifford.vector(&v.normalize());
                    worst = worst.max(((e * phi).norm() - phi.norm()).abs());
                }
                at_most(worst, 1e-12)
            },
        },
        Check {
            name: "bg_operators_square_root",
            ops: &["bg_operators"],
            run: |_| {
                let mut worst: f64 = 0.0;
                for seed in 0..20 {
                    let g = random_spd(seed);
                    let (a, b) = bg_operators(&g)?;
                    let binv = b.try_inverse().ok_or("B is singular")?;
                    let ortho = binv.transpose() * g * binv - Matrix3::identity();
                    worst = worst.max(max_entry(&(b * b - a))).max(max_entry(&ortho));
                }
                at_most(worst, 1e-12)
            },
        },
        Check {
            name: "christoffel_constant_metric",
            ops: &["christoffel"],
            run: |_| {
                let g = MetricField::constant(grid(8), random_spd(3))?;
                let worst = christoffel(&g).iter().flatten().map(max_entry).fold(0.0, f64::max);
                at_most(worst, 0.0)
            },
        },
        Check {
            name: "christoffel_translation",
            ops: &["christoffel"],
            run: |_| {
                let c = random_config(8, 1, 0.1)?;
                let shift = [3, -1, 2];
                let a = christoffel(&c.metric().translated(shift));
                let b = christoffel(c.metric()).translated(shift);
                let same = a == b;
                at_most(if same { 0.0 } else { 1.0 }, 0.0)
            },
        },
        Check {
            name: "divergence_killing_adjoint",
            ops: &["divergence", "killing_operator"],
            run: |_| {
                let c = random_config(16, 2, 0.1)?;
                let g = c.metric();
                let x = smooth_vector(c.grid(), 11, 1.0, 1);
                let h = smooth_tangent(&c, 12, 1.0, 1).h;
                let lhs = vector_inner(g, &divergence(g, &h)?, &x)?;
                let k = TangentSection::new(killing_operator(g, &x)?, Field::zeros(c.grid()))?;
                let rhs = l2_inner(g, &TangentSection::new(h, Field::zeros(c.grid()))?, &k)?;
                at_most((lhs - rhs).abs() / rhs.abs(), 1e-3)
            },
        },
        Check {
            name: "killing_constant_field",
            ops: &["killing_operator"],
            run: |_| {
                let g = MetricField::flat(grid(8));
                let x = Field::constant(g.grid(), Vector3::new(0.3, -1.2, 0.7));
                at_most(killing_operator(&g, &x)?.iter().map(max_entry).fold(0.0, f64::max), 0.0)
            },
        },
        Check {
            name: "volume_scaling",
            ops: &["volume_element"],
            run: |_| {
                let c = random_config(8, 3, 0.1)?;
                let mut worst = (total_volume(&MetricField::flat(grid(8))) - 1.0).abs();
                let v = total_volume(c.metric());
                for s in [0.5, 2.0, 3.0] {
                    worst = worst.max((total_volume(&c.metric().scaled(s * s)?) - s * s * s * v).abs() / v);
                }
                let positive = volume_element(c.metric()).iter().all(|&x| x > 0.0);
                at_most(if positive { worst } else { f64::INFINITY }, 1e-13)
            },
        },
        Check {
            name: "l2_inner_identity_trace",
            ops: &["l2_inner"],
            run: |_| {
                let grid = grid(8);
                let t = TangentSection::new(Field::constant(grid, Matrix3::identity()), Field::zeros(grid))?;
                at_most((l2_inner(&MetricField::flat(grid), &t, &t)? - 3.0).abs(), 1e-13)
            },
        },
        Check {
            name: "sobolev_constant_and_parseval",
            ops: &["sobolev_norm"],
            run: |_| {
                let grid = grid(8);
                let u = Field::constant(grid, -2.5f64);
                let mut worst: f64 = 0.0;
                for s in [-3.0, -2.0, 0.0, 2.0] {
                    worst = worst.max((sobolev_norm(&u, s) - 2.5).abs());
                }
                let v = smooth_vector(grid, 4, 1.0, 3);
                worst = worst.max((sobolev_norm(&v, 0.0) - v.flat_l2_norm()).abs() / v.flat_l2_norm());
                let n = sobolev_norms(&v, &[-2.0, 0.0, 2.0]);
                worst = worst.max((n[1] * n[1] - n[0] * n[2]).max(0.0) / (n[1] * n[1]));
                at_most(worst, 1e-12)
            },
        },
        Check {
            name: "clifford_two_form_norm",
            ops: &["clifford_two_form"],
            run: |_| {
                let c = random_config(8, 5, 0.1)?;
                let mut w = Matrix3::zeros();
                w[(0, 1)] = 1.0;
                w[(1, 0)] = -1.0;
                let out = clifford_two_form(&Field::constant(c.grid(), w), c.spinor())?;
                let worst = out.iter().zip(c.spinor().iter()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);
                at_most(worst, 1e-12)
            },
        },
        Check {
            name: "covariant_derivative_parallel",
            ops: &["spin_covariant_derivative"],
            run: |_| {
                let d = spin_covariant_derivative(&flat_constant(grid(8)))?;
                at_most(d.iter().flatten().map(|s| s.norm()).fold(0.0, f64::max), 1e-14)
            },
        },
        Check {
            name: "covariant_derivative_plane_wave",
            ops: &["spin_covariant_derivative"],
            run: |_| {
                let c = synthesize_initial(Recipe::SpinorWave { k: 1 }, grid(32), 0)?;
                let d = spin_covariant_derivative(&c)?;
                let mut worst: f64 = 0.0;
                for (idx, p) in c.spinor().iter().enumerate() {
                    let expected = p * Complex64::new(0.0, 2.0 * PI);
                    worst = worst.max((d[idx][0] - expected).norm() / (2.0 * PI)).max(d[idx][1].norm()).max(d[idx][2].norm());
                }
                at_most(worst, 1e-4)
            },
        },
        Check {
            name: "chart_round_trip",
            ops: &["chart_to"],
            run: |_| {
                let c = random_config(8, 6, 0.1)?;
                let t = smooth_tangent(&c, 7, 0.05, 2);
                let back = chart_from(&c, &chart_to(&c, &t)?)?;
                let d = back.axpy(-1.0, &t);
                at_most(tangent_norm(c.metric(), &d)? / tangent_norm(c.metric(), &t)?, 1e-13)
            },
        },
        Check {
            name: "pushforward_translation_energy",
            ops: &["pushforward", "energy"],
            run: |_| {
                let c = random_config(8, 8, 0.1)?;
                let moved = pushforward(&Diffeo::Symmetry(GridSymmetry::translation([1, 2, -3])), &c)?;
                let e = energy(&c)?;
                at_most((energy(&moved)? - e).abs() / e, 1e-14)
            },
        },
        Check {
            name: "pushforward_identity",
            ops: &["pushforward"],
            run: |_| {
                let c = random_config(8, 9, 0.1)?;
                let id = ResampledDiffeo::identity(c.grid(), Interpolation::default());
                at_most(configuration_distance(&pushforward(&Diffeo::Resampled(id), &c)?, &c)?, 1e-14)
            },
        },
    ]
}

// ---------------------------------------------------------------- gradient

fn gradient_suite() -> Vec<Check> {
    vec![
        Check {
            name: "energy_flat_constant",
            ops: &["energy"],
            run: |_| at_most(energy(&flat_constant(grid(8)))?, 0.0),
        },
        Check {
            name: "energy_plane_wave",
            ops: &["energy"],
            run: |_| {
                let c = synthesize_initial(Recipe::SpinorWave { k: 1 }, grid(32), 0)?;
                at_most((energy(&c)? - 2.0 * PI * PI).abs() / (2.0 * PI * PI), 1e-3)
            },
        },
        Check {
            name: "energy_scaling",
            ops: &["energy"],
            run: |_| {
                let c = random_config(8, 10, 0.1)?;
                let e = energy(&c)?;
                let mut worst: f64 = 0.0;
                for s in [0.5, 2.0, 3.0] {
                    worst = worst.max((energy(&c.with_scaled_metric(s)?)? - s * e).abs() / e);
                }
                at_most(worst, 1e-12)
            },
        },
        Check {
            name: "gradient_directional_derivatives",
            ops: &["gradient", "energy", "chart_to"],
            run: |_| {
                let c = random_config(8, 11, 0.1)?;
                let (_, q) = energy_and_gradient(&c)?;
                let mut worst: f64 = 0.0;
                for seed in 0..100 {
                    let t = smooth_tangent(&c, 1000 + seed, 1.0, 2);
                    let qt = l2_inner(c.metric(), &q.as_tangent(), &t)?;
                    let central = |eps: f64| -> Result<f64, Box<dyn StdError>> {
                        let ep = energy(&chart_to(&c, &t.scaled(eps))?)?;
                        let em = energy(&chart_to(&c, &t.scaled(-eps))?)?;
                        Ok((ep - em) / (2.0 * eps))
                    };
                    // Richardson extrapolation cancels the O(eps^2) term.
                    let fd = (4.0 * central(5e-4)? - central(1e-3)?) / 3.0;
                    worst = worst.max((fd + qt).abs() / qt.abs());
                }
                at_most(worst, 1e-6)
            },
        },
        Check {
            name: "gradient_critical_point",
            ops: &["gradient"],
            run: |_| {
                let q = gradient(&flat_constant(grid(8)))?;
                at_most(q.l2_norm(&MetricField::flat(grid(8)))?, 1e-14)
            },
        },
        Check {
            name: "gradient_tangency",
            ops: &["gradient"],
            run: |_| {
                let c = random_config(8, 12, 0.1)?;
                let q = gradient(&c)?;
                let worst = q.q2.iter().zip(c.spinor().iter()).map(|(a, p)| p.dotc(a).re.abs()).fold(0.0, f64::max);
                at_most(worst, 1e-13)
            },
        },
        Check {
            name: "gradient_translation_equivariance",
            ops: &["gradient"],
            run: |_| {
                let c = random_config(8, 13, 0.1)?;
                let shift = [2, 0, -1];
                let a = gradient(&c.translated(shift))?;
                let b = gradient(&c)?;
                let same = a.q1 == b.q1.translated(shift) && a.q2 == b.q2.translated(shift);
                at_most(if same { 0.0 } else { 1.0 }, 0.0)
            },
        },
        Check {
            name: "gradient_scaling_q1",
            ops: &["gradient"],
            run: |_| {
                let c = random_config(8, 14, 0.1)?;
                let scale = gradient(&c)?.l2_norm(c.metric())?;
                let mut worst: f64 = 0.0;
                for s in [0.5, 2.0, 3.0] {
                    worst = worst.max(gradient_scaling_q1_check(&c, s)? / scale);
                }
                at_most(worst, 1e-10)
            },
        },
        Check {
            name: "gradient_scaling_q2",
            ops: &["gradient_scaling_q2_check"],
            run: |_| {
                let c = random_config(8, 15, 0.1)?;
                let scale = gradient(&c)?.l2_norm(c.metric())?;
                let mut worst = gradient_scaling_q2_check(&c, 1.0)?;
                for s in [0.5, 2.0, 3.0] {
                    worst = worst.max(gradient_scaling_q2_check(&c, s)? / scale);
                }
                at_most(worst, 1e-10)
            },
        },
        Check {
            name: "lambda_exact_adjoint",
            ops: &["lambda_star", "lambda"],
            run: |_| {
                let c = random_config(8, 16, 0.1)?;
                let mut worst: f64 = 0.0;
                for seed in 0..5 {
                    let x = smooth_vector(c.grid(), 100 + seed, 1.0, 2);
                    let t = smooth_tangent(&c, 200 + seed, 1.0, 2);
                    let a = l2_inner(c.metric(), &lambda_star(&c, &x)?, &t)?;
                    let b = vector_inner(c.metric(), &x, &lambda(&c, &t)?)?;
                    worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
                }
                at_most(worst, 1e-12)
            },
        },
        Check {
            name: "lambda_star_killing_fields",
            ops: &["lambda_star"],
            run: |_| {
                let c = flat_constant(grid(8));
                let t = lambda_star(&c, &Field::constant(c.grid(), Vector3::new(1.0, -0.5, 2.0)))?;
                at_most(tangent_norm(c.metric(), &t)?, 1e-14)
            },
        },
        Check {
            name: "bianchi_refinement",
            ops: &["lambda", "gradient"],
            run: |_| {
                let mut ratios = Vec::new();
                for n in [8, 16, 32] {
                    let c = random_config(n, 17, 0.1)?;
                    let q = gradient(&c)?;
                    let lq = lambda(&c, &q.as_tangent())?;
                    let num = vector_inner(c.metric(), &lq, &lq)?.sqrt();
                    let den = sobolev_norm(&q.q1, 1.0).hypot(sobolev_norm(&q.q2, 1.0));
                    ratios.push(num / den);
                }
                at_least((ratios[0] / ratios[1]).min(ratios[1] / ratios[2]), 3.5)
            },
        },
        Check {
            name: "gauge_vector_constant_metric",
            ops: &["gauge_vector"],
            run: |_| {
                let ctx = GaugeContext::flat(grid(8));
                let g = MetricField::constant(grid(8), random_spd(4))?;
                at_most(gauge_vector(&ctx, &g)?.max_norm(), 0.0)
            },
        },
        Check {
            name: "gauged_gradient_definition",
            ops: &["gauged_gradient", "gauge_vector", "lambda_star"],
            run: |_| {
                let c = random_config(8, 18, 0.1)?;
                let ctx = GaugeContext::flat(c.grid());
                let tilde = gauged_gradient(&ctx, &c)?.into_tangent();
                let mut expected = gradient(&c)?.into_tangent().axpy(1.0, &lambda_star(&c, &gauge_vector(&ctx, c.metric())?)?);
                expected.project_tangent(c.spinor());
                let d = tilde.axpy(-1.0, &expected);
                at_most(tangent_norm(c.metric(), &d)? / tangent_norm(c.metric(), &expected)?, 1e-12)
            },
        },
        Check {
            name: "gauged_gradient_critical",
            ops: &["gauged_gradient"],
            run: |_| {
                let c = flat_constant(grid(8));
                let q = gauged_gradient(&GaugeContext::flat(c.grid()), &c)?;
                at_most(q.l2_norm(c.metric())?, 1e-14)
            },
        },
        Check {
            name: "volume_normalized_trace_free",
            ops: &["volume_normalized_gradient"],
            run: |_| {
                let c = random_config(8, 19, 0.1)?;
                let q = volume_normalized_gradient(&c)?;
                let scale = gradient(&c)?.l2_norm(c.metric())?;
                at_most(integrated_trace(c.metric(), &q.q1).abs() / scale, 1e-12)
            },
        },
        Check {
            name: "loja_ratio_conventions",
            ops: &["loja_ratio"],
            run: |_| {
                let critical = loja_ratio(&flat_constant(grid(8)))?;
                let wave = loja_ratio(&synthesize_initial(Recipe::SpinorWave { k: 1 }, grid(16), 0)?)?;
                let ok = critical == 0.0 && wave.is_finite() && wave > 0.0;
                at_most(if ok { 0.0 } else { 1.0 }, 0.0)
            },
        },
    ]
}

// ---------------------------------------------------------------- flows

fn short_cfg(t_end: f64) -> IntegratorConfig {
    IntegratorConfig { t_end, rel_tol: 1e-6, ..IntegratorConfig::default() }
}

fn flows() -> Vec<Check> {
    vec![
        Check {
            name: "step_critical_point",
            ops: &["step"],
            run: |_| {
                let c = flat_constant(grid(8));
                let mut flow = Flow::new(FlowKind::Spinor, &c, short_cfg(1.0), None)?;
                for _ in 0..5 {
                    flow.step()?;
                }
                at_most(configuration_distance(&flow.state()?, &c)?, 1e-14)
            },
        },
        Check {
            name: "step_energy_decrease",
            ops: &["step"],
            run: |_| {
                let c = random_config(8, 20, 0.05)?;
                let cfg = short_cfg(1.0);
                let mut flow = Flow::new(FlowKind::Spinor, &c, cfg.clone(), None)?;
                let mut e = energy(&c)?;
                let mut worst = f64::NEG_INFINITY;
                for _ in 0..20 {
                    let info = flow.step()?;
                    worst = worst.max((info.row.energy - e) / (cfg.rel_tol * e));
                    e = info.row.energy;
                }
                at_most(worst, 1.0)
            },
        },
        Check {
            name: "step_volume_normalized",
            ops: &["step"],
            run: |_| {
                let c = random_config(8, 21, 0.05)?;
                let unit = c.with_scaled_metric(total_volume(c.metric()).powf(-1.0 / 3.0))?;
                let cfg = short_cfg(1.0);
                let mut flow = Flow::new(FlowKind::VolumeNormalized, &unit, cfg.clone(), None)?;
                let mut worst: f64 = 0.0;
                for _ in 0..20 {
                    worst = worst.max((flow.step()?.row.volume - 1.0).abs());
                }
                at_most(worst, 10.0 * cfg.rel_tol)
            },
        },
        Check {
            name: "run_flat_constant",
            ops: &["run"],
            run: |_| {
                let c = flat_constant(grid(8));
                let (fin, trace) = run(FlowKind::Spinor, &c, short_cfg(0.5), None)?;
                let e_max = trace.rows.iter().map(|r| r.energy).fold(0.0, f64::max);
                at_most(e_max.max(configuration_distance(&fin, &c)?), 1e-14)
            },
        },
        Check {
            name: "run_energy_identity",
            ops: &["run"],
            run: |_| {
                let c = random_config(8, 22, 0.05)?;
                let cfg = IntegratorConfig { dt_max: 1e-4, ..short_cfg(0.01) };
                let (_, trace) = run(FlowKind::Spinor, &c, cfg.clone(), None)?;
                let rows = &trace.rows;
                let de = rows[rows.len() - 1].energy - rows[0].energy;
                let defect = (de + trace.dissipation(0, rows.len() - 1)).abs();
                at_most(defect / (de.abs()), 1e-4)
            },
        },
        Check {
            name: "mapping_rhs_identity",
            ops: &["mapping_rhs"],
            run: |_| {
                let flat = MetricField::flat(grid(8));
                let id = ResampledDiffeo::identity(flat.grid(), Interpolation::default());
                at_most(mapping_rhs(&flat, &flat, &id)?.max_norm(), 0.0)
            },
        },
        Check {
            name: "mapping_rhs_linearization",
            ops: &["mapping_rhs", "divergence", "killing_operator"],
            run: |_| {
                let flat = MetricField::flat(grid(16));
                let eps = 1e-5;
                let mut worst: f64 = 0.0;
                for seed in 0..5 {
                    let x = smooth_vector(flat.grid(), 300 + seed, 1.0, 2);
                    let p = |s: f64| -> Result<VectorField, Box<dyn StdError>> {
                        Ok(mapping_rhs(&flat, &flat, &ResampledDiffeo::new(x.scaled(s), Interpolation::default())?)?)
                    };
                    let fd = p(eps)?.axpy(-1.0, &p(-eps)?).scaled(0.5 / eps);
                    let exact = divergence(&flat, &killing_operator(&flat, &x)?)?.scaled(-4.0);
                    worst = worst.max(fd.axpy(-1.0, &exact).flat_l2_norm() / exact.flat_l2_norm());
                }
                at_most(worst, 1e-4)
            },
        },
        Check {
            name: "mapping_rhs_dissipative",
            ops: &["mapping_rhs"],
            run: |_| {
                let flat = MetricField::flat(grid(8));
                let eps = 1e-6;
                let mut worst = f64::NEG_INFINITY;
                for seed in 0..10 {
                    let x = smooth_vector(flat.grid(), 400 + seed, 1.0, 2);
                    let f = ResampledDiffeo::new(x.scaled(eps), Interpolation::default())?;
                    let dp = mapping_rhs(&flat, &flat, &f)?.scaled(1.0 / eps);
                    worst = worst.max(vector_inner(&flat, &dp, &x)? / vector_inner(&flat, &x, &x)?);
                }
                at_most(worst, 0.0)
            },
        },
        Check {
            name: "reconstruct_critical_trajectory",
            ops: &["reconstruct_gauged"],
            run: |_| {
                let c = flat_constant(grid(8));
                let trajectory: Vec<(f64, Configuration)> = (0..4).map(|k| (0.25 * k as f64, c.clone())).collect();
                let out = reconstruct_gauged(&trajectory, c.metric(), short_cfg(1.0), Interpolation::default())?;
                let mut worst: f64 = 0.0;
                for (diffeo, config) in &out {
                    worst = worst.max(diffeo.displacement().max_norm()).max(configuration_distance(config, &c)?);
                }
                at_most(worst, 1e-14)
            },
        },
        Check {
            name: "slice_fixed_point",
            ops: &["project_to_slice"],
            run: |_| {
                let c = flat_constant(grid(8));
                let p = project_to_slice(&c, &c, &SliceOptions::default())?;
                at_most(p.diffeo.displacement().max_norm().max(configuration_distance(&p.config, &c)?), 0.0)
            },
        },
        Check {
            name: "slice_contraction",
            ops: &["project_to_slice"],
            run: |_| {
                let base = flat_constant(grid(8));
                let target = random_config(8, 23, 1e-2)?;
                let p = project_to_slice(&target, &base, &SliceOptions::default())?;
                let worst = p.residuals.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
                at_most(worst, 0.5)
            },
        },
        Check {
            name: "config_round_trip",
            ops: &["parse_config"],
            run: |_| {
                let text = "[grid]\nn = 8\n[flow]\nkind = gauged\nt_end = 2\n[init]\nrecipe = random_smooth\namplitude = 0.01\ncutoff = 3\nseed = 5\n[gauge]\nreconstruct = true\n";
                let cfg = parse_config(text)?;
                let again = parse_config(&cfg.to_text())?;
                let rejected = parse_config("[grid]\nn = 12\n").is_err();
                at_most(if again == cfg && rejected { 0.0 } else { 1.0 }, 0.0)
            },
        },
        Check {
            name: "synthesis_determinism",
            ops: &["synthesize_initial"],
            run: |_| {
                let recipe = Recipe::RandomSmooth { amplitude: 1e-2, cutoff: 4 };
                let a = synthesize_initial(recipe, grid(8), 7)?;
                let b = synthesize_initial(recipe, grid(8), 7)?;
                let critical = energy(&synthesize_initial(Recipe::FlatConstant, grid(8), 0)?)? == 0.0;
                let ok = configuration_checksum(&a) == configuration_checksum(&b) && critical;
                at_most(if ok { 0.0 } else { 1.0 }, 0.0)
            },
        },
        Check {
            name: "experiment_flat_constant",
            ops: &["run_experiment"],
            run: |_| {
                let dir = std::env::temp_dir().join(format!("spinflow-check-{}", std::process::id()));
                let _ = std::fs::remove_dir_all(&dir);
                let mut cfg = crate::config::ExperimentConfig::default();
                cfg.flow.t_end = 0.1;
                let outcome = run_experiment_in(&cfg, &dir);
                let _ = std::fs::remove_dir_all(&dir);
                let summary = outcome?;
                let ok = summary.report.get("status") == Some("already critical");
                at_most(if ok { 0.0 } else { 1.0 }, 0.0)
            },
        },
    ]
}

// ---------------------------------------------------------------- decay

fn synthetic_trace(energy: impl Fn(f64) -> f64, q: impl Fn(f64) -> f64) -> FlowTrace {
    let mut trace = FlowTrace::new();
    for i in 0..200 {
        let t = 0.05 * i as f64;
        let v = q(t);
        trace.push(TraceRow {
            t,
            energy: energy(t),
            q_l2: v,
            q_hm3: 0.5 * v,
            q_hk: 2.0 * v,
            volume: 1.0,
            phi_min: 1.0,
            phi_max: 1.0,
            dt: 0.05,
        });
    }
    trace
}

fn decay() -> Vec<Check> {
    vec![
        Check {
            name: "fit_exponential_synthetic",
            ops: &["fit_energy_decay"],
            run: |_| {
                let trace = synthetic_trace(|t| 5.0 * (-0.7 * t).exp(), |t| (-0.35 * t).exp());
                let fit = fit_energy_decay(&trace, 0.0, FitWindow::All)?;
                let bad = fit.model != DecayModel::Exponential || fit.r_squared < 1.0 - 1e-10;
                at_most(if bad { f64::INFINITY } else { (fit.rate - 0.7).abs() }, 1e-6)
            },
        },
        Check {
            name: "fit_power_law_synthetic",
            ops: &["fit_energy_decay"],
            run: |_| {
                let trace = synthetic_trace(|t| (1.0 + t).powi(-3), |t| (1.0 + t).powi(-2));
                let fit = fit_energy_decay(&trace, 0.0, FitWindow::All)?;
                let bad = fit.model != DecayModel::PowerLaw;
                at_most(if bad { f64::INFINITY } else { (fit.rate - 3.0).abs() }, 1e-6)
            },
        },
        Check {
            name: "fit_gradient_synthetic",
            ops: &["fit_gradient_decay"],
            run: |_| {
                let trace = synthetic_trace(|t| (-0.8 * t).exp(), |t| 3.0 * (-0.4 * t).exp());
                let mut worst: f64 = 0.0;
                for column in [NormColumn::L2, NormColumn::HMinus3, NormColumn::Hk] {
                    worst = worst.max((fit_gradient_decay(&trace, column, FitWindow::All)?.rate - 0.4).abs());
                }
                at_most(worst, 1e-6)
            },
        },
        Check {
            name: "theta_synthetic",
            ops: &["estimate_theta"],
            run: |_| {
                let mut worst: f64 = 0.0;
                for theta in [2.0, 1.5] {
                    let trace = synthetic_trace(|t| (-theta * 0.3 * t).exp(), |t| (-0.3 * t).exp());
                    worst = worst.max((estimate_theta(&trace, 0.0)?.theta - theta).abs());
                }
                at_most(worst, 1e-9)
            },
        },
        Check {
            name: "rate_laws_values",
            ops: &["rate_laws"],
            run: |_| {
                let (b, g) = rate_laws(1.5)?;
                let (bi, gi) = rate_laws(2.0)?;
                let ok = rate_laws(2.5).is_err() && bi.is_infinite() && gi.is_infinite();
                at_most(if ok { (b - 3.0).abs().max((g - 1.0).abs()) } else { f64::INFINITY }, 1e-12)
            },
        },
        Check {
            name: "decay_lemma",
            ops: &["verify_decay_lemma"],
            run: |_| {
                let mut worst: f64 = 0.0;
                for theta in [1.5, 2.0] {
                    worst = worst.max(verify_decay_lemma(1.0, theta, 1.0, 10.0, 1e-3)?.max_violation());
                }
                at_most(worst, 1e-8)
            },
        },
    ]
}
