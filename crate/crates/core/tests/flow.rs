mod common;

use common::*;
use nalgebra::Vector3;
use proptest::prelude::*;
use spinflow_core::energy::{energy, gradient, GaugeContext};
use spinflow_core::flow::*;
use spinflow_core::grid::*;
use spinflow_core::spin::Configuration;

fn grid(n: usize) -> Grid {
    Grid::new(n).unwrap()
}

/// `y' = -rate y` per component, integrating `|y|^2`.
struct Decay {
    rate: Vec<f64>,
    last: f64,
}

impl OdeSystem for Decay {
    fn rhs(&mut self, _t: f64, y: &[f64]) -> spinflow_core::Result<Vec<f64>> {
        self.last = y.iter().map(|v| v * v).sum();
        Ok(y.iter().zip(&self.rate).map(|(v, r)| -r * v).collect())
    }

    fn integrand(&self) -> f64 {
        self.last
    }
}

fn integrate_decay(scheme: Scheme, rate: Vec<f64>, t_end: f64) -> (Stepper, f64, usize) {
    let cfg = IntegratorConfig { scheme, t_end, rel_tol: 1e-8, dt_max: 1.0, ..IntegratorConfig::default() };
    let n = rate.len();
    let mut sys = Decay { rate, last: 0.0 };
    let mut stepper = Stepper::new(cfg, 0.0, vec![1.0; n]);
    let (mut quad, mut evals) = (0.0, 0);
    while stepper.t < t_end {
        let r = stepper.step(&mut sys, t_end).unwrap();
        quad += r.quadrature;
        evals += r.evaluations;
    }
    (stepper, quad, evals)
}

#[test]
fn bogacki_shampine_solves_linear_decay() {
    let (s, quad, _) = integrate_decay(Scheme::BogackiShampine, vec![1.0, 3.0], 2.0);
    assert_eq!(s.t, 2.0);
    assert!((s.y[0] - (-2.0f64).exp()).abs() < 1e-7);
    assert!((s.y[1] - (-6.0f64).exp()).abs() < 1e-7);
    let exact = (1.0 - (-4.0f64).exp()) / 2.0 + (1.0 - (-12.0f64).exp()) / 6.0;
    assert!((quad - exact).abs() < 1e-7, "{quad} {exact}");
}

#[test]
fn chebyshev_handles_stiff_decay_cheaply() {
    let (s, quad, evals) = integrate_decay(Scheme::Chebyshev, vec![1.0, 1e4], 1.0);
    assert!((s.y[0] - (-1.0f64).exp()).abs() < 1e-6);
    assert!(s.y[1].abs() < 1e-6);
    let exact = (1.0 - (-2.0f64).exp()) / 2.0 + 0.5e-4;
    assert!((quad - exact).abs() < 1e-4, "{quad} {exact}");
    let (_, _, explicit) = integrate_decay(Scheme::BogackiShampine, vec![1.0, 1e4], 1.0);
    assert!(evals * 3 < explicit, "{evals} vs {explicit}");
}

#[test]
fn invalid_integrator_settings_are_rejected() {
    let d = IntegratorConfig::default();
    assert!(d.validate().is_ok());
    assert!(IntegratorConfig { rel_tol: 0.5, ..d.clone() }.validate().is_err());
    assert!(IntegratorConfig { dt_initial: 1.0, dt_max: 0.1, ..d.clone() }.validate().is_err());
    assert!(IntegratorConfig { t_end: -1.0, ..d }.validate().is_err());
    assert_eq!("rkc".parse::<Scheme>().unwrap(), Scheme::Chebyshev);
    assert!("euler".parse::<Scheme>().is_err());
    for k in [FlowKind::Spinor, FlowKind::Gauged, FlowKind::VolumeNormalized, FlowKind::Mapping] {
        assert_eq!(k.name().parse::<FlowKind>().unwrap(), k);
    }
}

#[test]
fn spinor_flow_decreases_the_energy_and_keeps_unit_spinors() {
    let cfg = IntegratorConfig { t_end: 0.01, ..IntegratorConfig::default() };
    let (last, trace) = run(FlowKind::Spinor, &smooth_config(grid(8), 3, 0.1), cfg, None).unwrap();
    assert!(trace.rows.windows(2).all(|w| w[1].energy < w[0].energy));
    assert!(trace.rows.iter().all(|r| (r.phi_min - 1.0).abs() < 1e-14 && (r.phi_max - 1.0).abs() < 1e-14));
    assert_eq!(trace.last().unwrap().t, 0.01);
    assert_eq!(energy(&last).unwrap(), trace.last().unwrap().energy);
}

#[test]
fn energy_identity_holds_along_the_spinor_flow() {
    let initial = smooth_config(grid(8), 4, 0.1);
    let cfg = IntegratorConfig { t_end: 0.02, ..IntegratorConfig::default() };
    let mut dissipation = 0.0;
    let (_, trace) = run_observed(FlowKind::Spinor, &initial, cfg, None, |info, _| {
        dissipation += info.report.quadrature;
        Ok(())
    })
    .unwrap();
    let drop = trace.rows[0].energy - trace.last().unwrap().energy;
    assert!((drop - dissipation).abs() < 1e-6 * 0.02, "{drop} {dissipation}");
}

#[test]
fn checkpoints_are_hit_exactly() {
    let cfg = IntegratorConfig { t_end: 0.01, checkpoints: vec![0.0025, 0.007], ..IntegratorConfig::default() };
    let (_, trace) = run(FlowKind::Spinor, &smooth_config(grid(4), 1, 0.1), cfg, None).unwrap();
    for t in [0.0025, 0.007, 0.01] {
        assert!(trace.rows.iter().any(|r| r.t == t), "{t}");
    }
}

#[test]
fn stop_threshold_ends_the_run() {
    let cfg = IntegratorConfig { t_end: 100.0, stop_threshold: 1e-1, ..IntegratorConfig::default() };
    let (_, trace) = run(FlowKind::Spinor, &smooth_config(grid(4), 2, 0.05), cfg, None).unwrap();
    let last = trace.last().unwrap();
    assert!(last.q_l2 < 1e-1 && last.t < 100.0);
    assert!(trace.rows[trace.len() - 2].q_l2 >= 1e-1);
}

#[test]
fn step_budget_aborts() {
    let cfg = IntegratorConfig { t_end: 1.0, max_steps: 3, ..IntegratorConfig::default() };
    let err = run(FlowKind::Spinor, &smooth_config(grid(4), 2, 0.1), cfg, None).unwrap_err();
    assert!(matches!(err, spinflow_core::Error::FlowAbort { .. }));
}

#[test]
fn volume_normalized_flow_keeps_the_volume() {
    let initial = smooth_config(grid(8), 5, 0.1);
    let cfg = IntegratorConfig { t_end: 0.02, ..IntegratorConfig::default() };
    let (_, trace) = run(FlowKind::VolumeNormalized, &initial, cfg, None).unwrap();
    let v0 = trace.rows[0].volume;
    assert!(trace.rows.iter().all(|r| (r.volume - v0).abs() < 1e-9 * v0));
}

#[test]
fn gauged_and_spinor_flows_agree_up_to_a_diffeomorphism() {
    let initial = smooth_config(grid(8), 6, 0.05);
    let cfg = IntegratorConfig { t_end: 0.05, ..IntegratorConfig::default() };
    let reference = MetricField::flat(initial.grid());
    let mut rec = GaugeReconstructor::new(reference.clone(), cfg.clone(), Default::default()).unwrap();
    let (spinor_final, spinor_trace) =
        run_observed(FlowKind::Spinor, &initial, cfg.clone(), None, |info, s| rec.advance(info.row.t, s.metric()))
            .unwrap();
    let (gauged_final, gauged_trace) = run(FlowKind::Gauged, &initial, cfg, Some(GaugeContext::new(reference))).unwrap();
    let d = configuration_distance(&gauged_final, &rec.reconstruct(&spinor_final).unwrap()).unwrap();
    assert!(d < 1e-4, "{d}");
    let (e_s, e_g) = (spinor_trace.last().unwrap().energy, gauged_trace.last().unwrap().energy);
    assert!((e_s - e_g).abs() < 1e-4 * e_s, "{e_s} {e_g}");
}

#[test]
fn flat_critical_point_does_not_move() {
    let flat = Configuration::flat_constant(grid(4), Spinor::new(1.0.into(), 0.0.into())).unwrap();
    for kind in [FlowKind::Spinor, FlowKind::VolumeNormalized] {
        let v = flow_velocity(kind, &flat, None).unwrap();
        assert_eq!(v.h.max_norm() + v.psi.max_norm(), 0.0);
    }
}

#[test]
fn mapping_rhs_vanishes_at_the_identity_between_equal_metrics() {
    let c = smooth_config(grid(8), 7, 0.1);
    let id = spinflow_core::spin::ResampledDiffeo::identity(c.grid(), Default::default());
    let v = mapping_rhs(c.metric(), c.metric(), &id).unwrap();
    assert!(v.max_norm() < 1e-12, "{}", v.max_norm());
    let pulled = pullback_metric(c.metric(), &id).unwrap();
    assert!(pulled.field().axpy(-1.0, c.metric().field()).max_norm() < 1e-14);
}

#[test]
fn neutral_mode_projection() {
    let g = grid(8);
    let v = smooth_vector(g, &mut rng(3), 1.0, 2);
    let p = project_neutral_modes(&v);
    assert!(project_neutral_modes(&p).axpy(-1.0, &p).max_norm() < 1e-14);
    let constant = Field::constant(g, Vector3::new(1.0, -2.0, 0.5));
    assert!(project_neutral_modes(&constant).max_norm() < 1e-14);
    let alternating = Field::from_fn(g, |i| {
        let [a, _, _] = g.coords(i);
        Vector3::new(if a % 2 == 0 { 1.0 } else { -1.0 }, 0.0, 0.0)
    });
    assert!(project_neutral_modes(&alternating).max_norm() < 1e-14);
}

#[test]
fn slice_base_is_its_own_projection() {
    let base = Configuration::flat_constant(grid(8), Spinor::new(1.0.into(), 0.0.into())).unwrap();
    let p = project_to_slice(&base, &base, &SliceOptions::default()).unwrap();
    assert_eq!(p.residuals[0], 0.0);
    assert!(configuration_distance(&p.config, &base).unwrap() < 1e-14);
    let curved = smooth_config(grid(8), 8, 0.05);
    assert!(project_to_slice(&base, &curved, &SliceOptions::default()).is_err());
}

#[test]
fn trace_round_trips_through_text() {
    let (_, trace) =
        run(FlowKind::Spinor, &smooth_config(grid(4), 9, 0.1), IntegratorConfig { t_end: 1e-3, ..Default::default() }, None)
            .unwrap();
    let mut bytes = Vec::new();
    trace.write(&mut bytes).unwrap();
    assert!(bytes.starts_with(TRACE_HEADER.as_bytes()));
    assert_eq!(FlowTrace::read(bytes.as_slice()).unwrap(), trace);
    assert!(FlowTrace::read("# t E\n1 2 3\n".as_bytes()).is_err());
}

#[test]
fn packing_round_trips() {
    let c = smooth_config(grid(4), 10, 0.2);
    let y = pack_configuration(&c);
    assert_eq!(unpack_configuration(c.grid(), &y).unwrap(), c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn configuration_distance_is_a_norm_of_the_difference(seed in 0u64..1000) {
        let a = smooth_config(grid(4), seed, 0.1);
        let b = smooth_config(grid(4), seed + 1, 0.1);
        prop_assert_eq!(configuration_distance(&a, &a).unwrap(), 0.0);
        let d = configuration_distance(&a, &b).unwrap();
        prop_assert!(d > 0.0);
        let q = gradient(&a).unwrap();
        prop_assert!(q.l2_norm(a.metric()).unwrap().is_finite());
    }
}
