use spinflow_core::flow::{FlowKind, Scheme};
use spinflow_lab::config::Reference;
use spinflow_lab::synth::Recipe;
use spinflow_lab::{parse_config, ExperimentConfig, Suite};

#[test]
fn empty_text_gives_defaults() {
    assert_eq!(parse_config("").unwrap(), ExperimentConfig::default());
}

#[test]
fn full_configuration_parses() {
    let text = "\
# perturbed torus
[grid]
n = 16

[flow]
kind = gauged
scheme = rkc
rel_tol = 1e-7
t_end = 5

[init]
recipe = random_smooth
amplitude = 0.01
cutoff = 4
seed = 7

[gauge]
reference = diagonal 1 2 3
interpolation = trigonometric

[output]
dir = runs/golden
trace_every = 2

[analysis]
e_limit = auto

[checks]
suite = algebra
";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.n, 16);
    assert_eq!(cfg.flow.kind, FlowKind::Gauged);
    assert_eq!(cfg.flow.scheme, Scheme::Chebyshev);
    assert_eq!(cfg.flow.rel_tol, 1e-7);
    assert_eq!(cfg.recipe, Recipe::RandomSmooth { amplitude: 0.01, cutoff: 4 });
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.gauge.reference, Reference::Diagonal([1.0, 2.0, 3.0]));
    assert_eq!(cfg.trace_every, 2);
    assert_eq!(cfg.e_limit, None);
    assert_eq!(cfg.suite, Some(Suite::Algebra));
}

#[test]
fn grid_size_must_be_a_power_of_two() {
    let err = parse_config("[grid]\nn = 12\n").unwrap_err();
    assert_eq!(err.0.len(), 1);
    assert_eq!(err.0[0].line, 2);
    assert!(err.0[0].message.contains("power of two"));
}

#[test]
fn duplicate_keys_name_both_lines() {
    let err = parse_config("[grid]\nn = 8\n\nn = 16\n").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("duplicate key `n` in [grid] (lines 2 and 4)"), "{msg}");
}

#[test]
fn every_problem_is_reported_in_line_order() {
    let text = "[grid]\nn = 12\n[flow]\nrel_tol = 0.5\nt_end = -1\nbogus = 3\n[init]\nrecipe = nope\n";
    let err = parse_config(text).unwrap_err();
    let lines: Vec<usize> = err.0.iter().map(|i| i.line).collect();
    assert_eq!(lines, [2, 4, 5, 6, 8]);
}

#[test]
fn reconstruct_requires_the_gauged_flow() {
    let err = parse_config("[flow]\nkind = spinor\n[gauge]\nreconstruct = true\n").unwrap_err();
    assert!(err.to_string().contains("kind = gauged"));
    assert!(parse_config("[flow]\nkind = gauged\n[gauge]\nreconstruct = true\n").is_ok());
}

#[test]
fn recipe_parameters_must_apply() {
    let err = parse_config("[init]\nrecipe = spinor_wave\namplitude = 0.1\n").unwrap_err();
    assert!(err.to_string().contains("amplitude"));
}

#[test]
fn canonical_text_round_trips() {
    let text = "[grid]\nn = 32\n[flow]\nkind = volume_normalized\nrel_tol = 3e-7\n\
                [init]\nrecipe = metric_bump\namplitude = 0.2\nmode = 3\nseed = 99\n\
                [analysis]\ne_limit = 1e-9\n[checks]\nsuite = all\n";
    let cfg = parse_config(text).unwrap();
    let again = parse_config(&cfg.to_text()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(again.to_text(), cfg.to_text());
}

#[test]
fn readme_example_parses() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```ini\n").unwrap() + "```ini\n".len();
    let block = &readme[start..start + readme[start..].find("```").unwrap()];
    let cfg = parse_config(block).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.suite, None);
}
