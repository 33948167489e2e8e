use std::collections::BTreeSet;

use approx::assert_relative_eq;
use proptest::prelude::*;
use psl_core::inference::{eager_inference, hard_violation, objective_value_weighted};
use psl_core::learning::learn_weights_traced;
use psl_core::program::RuleWeight;
use psl_core::{
    learn_weights, map_inference, parse_program, FactSet, GroundingContext, InferenceConfig, Interpretation,
    LearningConfig, Program, SimilarityRegistry, TruthValue,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DECLS: &str = "closed e(n, n). closed a(n). open h(n). open r(n, n).\n";

const TEMPLATES: [&str; 8] = [
    "a(X) => h(X)",
    "e(X, Y) & h(X) => h(Y)",
    "e(X, Y) => r(X, Y)",
    "r(X, Y) & h(X) => h(Y)",
    "a(X) => ~h(X)",
    "r(X, Y) => ~r(Y, X)",
    "e(X, Y) & a(Y) & X != Y => r(Y, X) | h(X)",
    "~h(X)",
];

struct Case {
    program: Program,
    facts: FactSet,
}

fn random_case(seed: u64, hard: bool) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from(DECLS);
    for template in TEMPLATES {
        if rng.gen_bool(0.6) {
            text.push_str(&format!("{:.2} : {template} .\n", rng.gen_range(0.1..3.0)));
        }
    }
    text.push_str("0.2 : ~r(X, Y) .\n");
    if hard {
        text.push_str("HARD : r(X, Y) & r(Y, Z) & X != Z => r(X, Z) .\nEXCLUSIVE : r(X, *) .\n");
    }
    let program = parse_program(&text).unwrap();
    let mut facts = FactSet::new(&program);
    let n = rng.gen_range(2..5);
    for i in 0..n {
        if rng.gen_bool(0.6) {
            let v = rng.gen_range(1..=10) as f64 / 10.0;
            facts.insert("a", &[&format!("x{i}")], v).unwrap();
        }
        for j in 0..n {
            if i != j && rng.gen_bool(0.4) {
                facts.insert("e", &[&format!("x{i}"), &format!("x{j}")], 1.0).unwrap();
            }
        }
    }
    Case { program, facts }
}

fn configs() -> [InferenceConfig; 2] {
    [InferenceConfig::default(), InferenceConfig::squared_l2()]
}

fn random_values(ctx: &GroundingContext<'_>, evidence: &Interpretation, rng: &mut ChaCha8Rng) -> Interpretation {
    let mut interp = evidence.clone();
    let atoms: BTreeSet<_> = ctx
        .ground_all(evidence)
        .unwrap()
        .iter()
        .flat_map(|g| g.atoms().cloned().collect::<Vec<_>>())
        .filter(|a| !ctx.facts().is_closed(a.predicate))
        .collect();
    for atom in atoms {
        interp.set_query(atom, TruthValue::new(rng.gen_range(0.0..=1.0)).unwrap()).unwrap();
    }
    interp
}

#[test]
fn lazy_agrees_with_eager() {
    let registry = SimilarityRegistry::default();
    for seed in 0..40 {
        let case = random_case(seed, false);
        let ctx = GroundingContext::new(&case.program, &case.facts, &registry).unwrap();
        let evidence = Interpretation::from_facts(&case.facts);
        for config in configs() {
            let lazy = map_inference(&ctx, &evidence, &config).unwrap();
            let eager = eager_inference(&ctx, &evidence, &config).unwrap();
            let weights: Vec<RuleWeight> = case.program.rules.iter().map(|r| r.weight).collect();
            let a = objective_value_weighted(&ctx, &lazy.interpretation, &config, &weights).unwrap();
            let b = objective_value_weighted(&ctx, &eager.interpretation, &config, &weights).unwrap();
            assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "seed {seed}: lazy {a} eager {b}");
            assert!(lazy.active.len() <= ctx.ground_all(&evidence).unwrap().len());
        }
    }
}

#[test]
fn map_beats_random_points() {
    let registry = SimilarityRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..20 {
        let case = random_case(seed, false);
        let ctx = GroundingContext::new(&case.program, &case.facts, &registry).unwrap();
        let evidence = Interpretation::from_facts(&case.facts);
        let weights: Vec<RuleWeight> = case.program.rules.iter().map(|r| r.weight).collect();
        for config in configs() {
            let map = map_inference(&ctx, &evidence, &config).unwrap();
            let best = objective_value_weighted(&ctx, &map.interpretation, &config, &weights).unwrap();
            for _ in 0..20 {
                let other = random_values(&ctx, &evidence, &mut rng);
                let value = objective_value_weighted(&ctx, &other, &config, &weights).unwrap();
                assert!(best <= value + 1e-6, "seed {seed}: map {best} random {value}");
            }
        }
    }
}

#[test]
fn hard_rules_hold_at_the_optimum() {
    let registry = SimilarityRegistry::default();
    for seed in 0..20 {
        let case = random_case(seed, true);
        let ctx = GroundingContext::new(&case.program, &case.facts, &registry).unwrap();
        let evidence = Interpretation::from_facts(&case.facts);
        let map = map_inference(&ctx, &evidence, &InferenceConfig::default()).unwrap();
        assert!(hard_violation(&ctx, &map.interpretation).unwrap() <= 1e-6, "seed {seed}");
    }
}

#[test]
fn activation_skips_only_satisfied_groundings() {
    let registry = SimilarityRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..30 {
        let case = random_case(seed, seed % 2 == 0);
        let ctx = GroundingContext::new(&case.program, &case.facts, &registry).unwrap();
        let evidence = Interpretation::from_facts(&case.facts);
        let interp = random_values(&ctx, &evidence, &mut rng);
        let value = |a: &psl_core::GroundAtom| interp.value(a).unwrap_or(0.0);
        let expected: BTreeSet<_> = ctx
            .ground_all(&evidence)
            .unwrap()
            .into_iter()
            .filter(|g| g.distance(value) > 0.0)
            .map(|g| g.key())
            .collect();
        let got: BTreeSet<_> = ctx.violated(None, &interp, 0.0).unwrap().into_iter().map(|g| g.key()).collect();
        assert_eq!(got, expected, "seed {seed}");
        let initial: BTreeSet<_> = ctx.initial_active_set(&evidence).unwrap().rules().iter().map(|g| g.key()).collect();
        let zero = |a: &psl_core::GroundAtom| evidence.value(a).unwrap_or(0.0);
        for g in ctx.ground_all(&evidence).unwrap() {
            if g.distance(zero) > 0.0 {
                assert!(initial.contains(&g.key()), "seed {seed}: missing initially violated grounding");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_derivative_in_each_weight(seed in 0u64..1000, rule in 0usize..4) {
        // d/dw of the L1 objective is the summed distance; of the squared
        // L2 objective it is 2 w times the summed squared distance
        let registry = SimilarityRegistry::default();
        let case = random_case(seed, false);
        let ctx = GroundingContext::new(&case.program, &case.facts, &registry).unwrap();
        let evidence = Interpretation::from_facts(&case.facts);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interp = random_values(&ctx, &evidence, &mut rng);
        let k = rule % case.program.rules.len();
        let weights: Vec<RuleWeight> = case.program.rules.iter().map(|r| r.weight).collect();
        let RuleWeight::Soft(w) = weights[k] else { return Ok(()); };
        let value = |a: &psl_core::GroundAtom| interp.value(a).unwrap_or(0.0);
        let distances: Vec<f64> = ctx.ground_rule(k, &evidence).unwrap().iter().map(|g| g.distance(value)).collect();
        for (config, analytic) in [
            (InferenceConfig::default(), distances.iter().sum::<f64>()),
            (InferenceConfig::squared_l2(), 2.0 * w * distances.iter().map(|d| d * d).sum::<f64>()),
        ] {
            let h = 1e-5;
            let mut up = weights.clone();
            up[k] = RuleWeight::Soft(w + h);
            let mut down = weights.clone();
            down[k] = RuleWeight::Soft(w - h);
            let numeric = (objective_value_weighted(&ctx, &interp, &config, &up).unwrap()
                - objective_value_weighted(&ctx, &interp, &config, &down).unwrap())
                / (2.0 * h);
            prop_assert!((numeric - analytic).abs() <= 1e-5 * (1.0 + analytic.abs()), "{numeric} vs {analytic}");
        }
    }
}

#[test]
fn learning_is_deterministic_and_respects_the_floor() {
    let registry = SimilarityRegistry::default();
    let case = random_case(3, false);
    let ctx = GroundingContext::new(&case.program, &case.facts, &registry).unwrap();
    let evidence = Interpretation::from_facts(&case.facts);
    let observed = map_inference(&ctx, &evidence, &InferenceConfig::default()).unwrap().interpretation;
    let config = LearningConfig { iterations: 10, ..LearningConfig::default() };
    let first = learn_weights_traced(&ctx, &evidence, &observed, &config).unwrap();
    let second = learn_weights_traced(&ctx, &evidence, &observed, &config).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.iterates.len(), 10);
    for w in first.iterates.iter().flat_map(|v| v.weights.iter()) {
        assert!(*w >= config.weight_floor);
    }
    let mean: Vec<f64> = (0..first.result.weights.len())
        .map(|k| first.iterates.iter().map(|v| v.weights[k]).sum::<f64>() / 10.0)
        .collect();
    for (a, b) in first.result.weights.iter().zip(&mean) {
        assert_relative_eq!(*a, *b, epsilon = 1e-12);
    }
    assert!(learn_weights(&ctx, &evidence, &observed, &LearningConfig { learning_rate: 0.0, ..config }).is_err());
}

#[test]
fn learning_recovers_the_dominant_rule() {
    let program = parse_program(
        "closed a/1. closed b/1. open h/1.\n1 : a(X) => h(X) .\n1 : b(X) => ~h(X) .",
    )
    .unwrap();
    let mut text = String::new();
    for i in 0..12 {
        text.push_str(&format!("a\tx{i}\nb\tx{i}\t0.5\n"));
    }
    let mut facts = FactSet::from_str(&program, &text).unwrap();
    let labels: Vec<_> = (0..12).map(|i| facts.atom("h", &[&format!("x{i}")]).unwrap()).collect();
    let registry = SimilarityRegistry::default();
    let ctx = GroundingContext::new(&program, &facts, &registry).unwrap();
    let evidence = Interpretation::from_facts(&facts);
    let mut observed = evidence.clone();
    for atom in labels {
        observed.set_query(atom, TruthValue::ONE).unwrap();
    }
    let learned = learn_weights(&ctx, &evidence, &observed, &LearningConfig::default()).unwrap();
    assert!(learned.weights[0] > learned.weights[1], "{learned}");
}
