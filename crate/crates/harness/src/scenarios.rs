//! Seeded synthetic programs and experiments.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psl_core::inference::map_inference;
use psl_core::learning::{learn_weights, LearningConfig};
use psl_core::{
    parse_program, FactSet, GroundingContext, InferenceConfig, InferenceError, Interpretation, Program,
    SimilarityRegistry, TruthValue,
};

use crate::desugar::desugar_sets;
use crate::metrics::{argmax_decision, f1_score, threshold_decisions, DecisionSet};
use crate::noise::{generate_noise, NoiseSpec, NoiseTargets};

/// A program together with its data.
#[derive(Debug, Clone)]
pub struct Instance {
    pub program: Program,
    pub facts: FactSet,
}

impl Instance {
    pub fn parse(program: &str, facts: &str) -> Self {
        let program = parse_program(program).unwrap_or_else(|e| panic!("generated program is invalid: {e}\n{program}"));
        let facts = FactSet::from_str(&program, facts).unwrap_or_else(|e| panic!("generated facts are invalid: {e}"));
        Instance { program, facts }
    }

    pub fn context<'a>(&'a self, registry: &'a SimilarityRegistry) -> GroundingContext<'a> {
        GroundingContext::new(&self.program, &self.facts, registry).expect("generated program grounds")
    }

    pub fn evidence(&self) -> Interpretation {
        Interpretation::from_facts(&self.facts)
    }

    /// A context over this data for `program`, which must share the schema,
    /// typically the same program with other weights.
    pub fn context_for<'a>(&'a self, program: &'a Program, registry: &'a SimilarityRegistry) -> GroundingContext<'a> {
        GroundingContext::new(program, &self.facts, registry).expect("generated program grounds")
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid_value(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0..=20) as f64 * 0.05
}

fn weight(rng: &mut ChaCha8Rng) -> String {
    format!("{:.2}", rng.gen_range(0.2..2.0))
}

/// A rule-only program over at most five query atoms `h(g, c)` and at most
/// twelve ground rules, mixing soft, hard and exclusivity constraints.
pub fn tiny_program(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let mut cells: Vec<(&str, &str)> = Vec::new();
    for g in ["a", "b"] {
        for c in ["c0", "c1", "c2"] {
            cells.push((g, c));
        }
    }
    cells.shuffle(&mut rng);
    let n_atoms = rng.gen_range(1..=5);
    let atoms: Vec<String> = cells[..n_atoms].iter().map(|(g, c)| format!("h({g}, {c})")).collect();
    let evidence: Vec<String> = cells.iter().map(|(g, c)| format!("e({g}, {c})")).collect();

    let mut text = String::from("closed e/2. open h/2.\n");
    if rng.gen_bool(0.5) {
        text.push_str("EXCLUSIVE : h(A, *) .\n");
    }
    let n_rules = rng.gen_range(1..=12);
    for _ in 0..n_rules {
        let pick = |rng: &mut ChaCha8Rng| atoms[rng.gen_range(0..atoms.len())].clone();
        let x = pick(&mut rng);
        let y = pick(&mut rng);
        let z = pick(&mut rng);
        let e = evidence[rng.gen_range(0..evidence.len())].clone();
        let body_head = match rng.gen_range(0..8) {
            0 => format!("{e} => {x}"),
            1 => format!("{x} => {y}"),
            2 => format!("{e} & {x} => {y}"),
            3 => format!("{x} & {y} => {z}"),
            4 => format!("~{x}"),
            5 => format!("{e} => ~{x}"),
            6 => format!("{e} => {x} | {y}"),
            _ => format!("{x} => ~{y}"),
        };
        let w = if rng.gen_bool(0.2) { "HARD".to_string() } else { weight(&mut rng) };
        writeln!(text, "{w} : {body_head} .").unwrap();
    }
    let mut facts = String::new();
    for (g, c) in &cells {
        writeln!(facts, "e\t{g}\t{c}\t{}", grid_value(&mut rng)).unwrap();
    }
    Instance::parse(&text, &facts)
}

/// A typed category-propagation program on a small random graph, with at
/// most a few hundred groundings.
pub fn relational_program(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let n = rng.gen_range(3..=5);
    let labels = rng.gen_range(2..=3);
    let mut text = String::from("closed attr(doc, label). closed link(doc, doc). open cat(doc, label).\n");
    writeln!(text, "{} : attr(A, C) => cat(A, C) .", weight(&mut rng)).unwrap();
    writeln!(text, "{} : link(A, B) & cat(B, C) => cat(A, C) .", weight(&mut rng)).unwrap();
    writeln!(text, "{} : ~cat(A, C) .", weight(&mut rng)).unwrap();
    if rng.gen_bool(0.5) {
        writeln!(text, "{} : link(A, B) & cat(A, C) => cat(B, C) .", weight(&mut rng)).unwrap();
    }
    if rng.gen_bool(0.3) {
        text.push_str("HARD : link(A, B) & attr(B, C) => cat(A, C) | ~cat(B, C) .\n");
    }
    if rng.gen_bool(0.5) {
        text.push_str("EXCLUSIVE : cat(A, *) .\n");
    }
    let mut facts = String::new();
    for d in 0..n {
        for l in 0..labels {
            if rng.gen_bool(0.6) {
                writeln!(facts, "attr\td{d}\tl{l}\t{}", grid_value(&mut rng)).unwrap();
            }
        }
        for e in 0..n {
            if e != d && rng.gen_bool(0.4) {
                writeln!(facts, "link\td{d}\td{e}").unwrap();
            }
        }
    }
    // every label and document must occur in a closed fact to be in a domain
    for l in 0..labels {
        writeln!(facts, "attr\td0\tl{l}\t{}", grid_value(&mut rng)).unwrap();
    }
    for d in 0..n {
        writeln!(facts, "link\td{d}\td{}", (d + 1) % n).unwrap();
    }
    Instance::parse(&text, &facts)
}

/// Similarity with transitivity as a hard rule plus exclusivity.
pub fn transitive_program(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let n = rng.gen_range(3..=6);
    let mut text = String::from("closed sim(item, item). open same(item, item).\n");
    writeln!(text, "{} : sim(A, B) => same(A, B) .", weight(&mut rng)).unwrap();
    writeln!(text, "{} : ~same(A, B) .", weight(&mut rng)).unwrap();
    text.push_str("HARD : same(A, B) & same(B, C) => same(A, C) .\n");
    if rng.gen_bool(0.5) {
        text.push_str("HARD : same(A, B) => same(B, A) .\n");
    }
    text.push_str("EXCLUSIVE : same(A, *) .\n");
    let mut facts = String::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(0.5) {
                writeln!(facts, "sim\ti{a}\ti{b}\t{}", grid_value(&mut rng)).unwrap();
            }
        }
    }
    for a in 0..n {
        writeln!(facts, "sim\ti{a}\ti{}\t{}", (a + 1) % n, grid_value(&mut rng)).unwrap();
    }
    Instance::parse(&text, &facts)
}

/// Two hard rules that cannot both hold.
pub fn contradictory_program() -> Instance {
    Instance::parse(
        "closed a/1. open h/1.\nHARD : a(X) => h(X) .\nHARD : a(X) => ~h(X) .\n1 : a(X) => h(X) .",
        "a\tx\n",
    )
}

pub const CATEGORY_PROGRAM: &str = "closed attr(doc, label). closed link(doc, doc). open cat(doc, label).
3.0 : attr(A, C) => cat(A, C) .
0.5 : link(A, B) & cat(B, C) => cat(A, C) .
EXCLUSIVE : cat(A, *) .
";

/// A labeled document graph for collective classification.
#[derive(Debug, Clone)]
pub struct CategoryGraph {
    pub instance: Instance,
    pub gold: DecisionSet,
    pub documents: usize,
    pub labels: usize,
}

/// Documents with a noisy attribute signal and homophilous links.
pub fn category_graph(seed: u64, documents: usize, labels: usize, program: &str) -> CategoryGraph {
    let mut rng = rng(seed);
    let truth: Vec<usize> = (0..documents).map(|_| rng.gen_range(0..labels)).collect();
    let mut facts = String::new();
    let mut gold = DecisionSet::default();
    for (d, &t) in truth.iter().enumerate() {
        gold.positives.insert(("cat".into(), vec![format!("d{d}"), format!("l{t}")]));
        // the attribute points at the true label most of the time
        let noisy = if rng.gen_bool(0.65) { t } else { rng.gen_range(0..labels) };
        writeln!(facts, "attr\td{d}\tl{noisy}\t{:.2}", rng.gen_range(0.3..0.9)).unwrap();
        if rng.gen_bool(0.5) {
            let other = rng.gen_range(0..labels);
            writeln!(facts, "attr\td{d}\tl{other}\t{:.2}", rng.gen_range(0.1..0.5)).unwrap();
        }
        for _ in 0..3 {
            let same: Vec<usize> = (0..documents).filter(|&e| e != d && truth[e] == t).collect();
            let target = if rng.gen_bool(0.8) && !same.is_empty() {
                same[rng.gen_range(0..same.len())]
            } else {
                rng.gen_range(0..documents)
            };
            if target != d {
                writeln!(facts, "link\td{d}\td{target}").unwrap();
            }
        }
    }
    CategoryGraph { instance: Instance::parse(program, &facts), gold, documents, labels }
}

impl CategoryGraph {
    /// One label per document: the highest-valued category atom.
    pub fn argmax_decisions(&self, interp: &Interpretation) -> DecisionSet {
        let facts = &self.instance.facts;
        let mut out = DecisionSet::default();
        for d in 0..self.documents {
            let candidates: Vec<_> = (0..self.labels)
                .filter_map(|l| facts.find_atom("cat", &[&format!("d{d}"), &format!("l{l}")]))
                .collect();
            if let Ok(best) = argmax_decision(interp, facts, &candidates) {
                out.positives.insert(facts.atom_key(&best));
            }
        }
        out
    }

    pub fn map_f1(&self, weights: &[f64], config: &InferenceConfig) -> Result<f64, InferenceError> {
        let registry = SimilarityRegistry::default();
        let program = self.instance.program.with_soft_weights(weights);
        let ctx = self.instance.context_for(&program, &registry);
        let map = map_inference(&ctx, &self.instance.evidence(), config)?;
        Ok(f1_score(&self.argmax_decisions(&map.interpretation), &self.gold).f1)
    }
}

#[derive(Debug, Clone)]
pub struct LearningOutcome {
    pub learned: Vec<f64>,
    pub f1_learned: f64,
    pub f1_generating: f64,
}

/// Labels a training graph with the MAP state under the generating weights,
/// learns from uniform initial weights, and scores both weight vectors on an
/// independent test graph.
pub fn learning_trial(seed: u64, config: &LearningConfig) -> Result<LearningOutcome, InferenceError> {
    let train = category_graph(seed, 50, 3, CATEGORY_PROGRAM);
    let test = category_graph(seed.wrapping_add(1_000_003), 50, 3, CATEGORY_PROGRAM);
    let generating = train.instance.program.soft_weights();
    let registry = SimilarityRegistry::default();

    let ctx = train.instance.context(&registry);
    let evidence = train.instance.evidence();
    let observed = map_inference(&ctx, &evidence, &config.inference)?.interpretation;

    let start = train.instance.program.with_soft_weights(&[1.0, 1.0]);
    let ctx = train.instance.context_for(&start, &registry);
    let learned = learn_weights(&ctx, &evidence, &observed, config)?.weights;

    Ok(LearningOutcome {
        f1_learned: test.map_f1(&learned, &config.inference)?,
        f1_generating: test.map_f1(&generating, &config.inference)?,
        learned,
    })
}

pub const ALIGNMENT_PROGRAM: &str = "closed src1(concept). closed src2(concept).
closed name(concept, string). closed child(concept, concept).
open similar(concept, concept).
1 : src1(A) & src2(B) & name(A, X) & name(B, Y) & fn[levenshtein](X, Y) => similar(A, B) .
1 : src1(A) & src2(B) & setsim[similar]({A.child}, {B.child}) => similar(A, B) .
1 : src1(A) & src2(B) & similar(A, B) => setsim[similar]({A.child}, {B.child}) .
1 : src1(A) & src2(B) => ~similar(A, B) .
EXCLUSIVE : similar(A, *) .
";

/// Two copies of one random concept tree, `x*` and `y*`, with identical
/// names and structure before noise.
#[derive(Debug, Clone)]
pub struct AlignmentPair {
    pub instance: Instance,
    pub gold: DecisionSet,
    pub concepts: usize,
}

pub fn alignment_pair(seed: u64, concepts: usize, noise: NoiseSpec, program: &Program) -> AlignmentPair {
    let mut rng = rng(seed);
    let mut facts = String::new();
    let mut gold = DecisionSet::default();
    let names: Vec<String> = (0..concepts)
        .map(|_| {
            let length = rng.gen_range(5..=9);
            (0..length).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
        })
        .collect();
    let parents: Vec<Option<usize>> = (0..concepts)
        .map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) })
        .collect();
    for side in ["x", "y"] {
        for i in 0..concepts {
            let src = if side == "x" { "src1" } else { "src2" };
            writeln!(facts, "{src}\t{side}{i}").unwrap();
            writeln!(facts, "name\t{side}{i}\t{}", names[i]).unwrap();
            if let Some(p) = parents[i] {
                writeln!(facts, "child\t{side}{p}\t{side}{i}").unwrap();
            }
        }
    }
    for i in 0..concepts {
        gold.positives.insert(("similar".into(), vec![format!("x{i}"), format!("y{i}")]));
    }
    let clean = FactSet::from_str(program, &facts).expect("generated facts");
    let targets = NoiseTargets { attributes: vec!["name".into()], relations: vec!["child".into()] };
    let noisy = generate_noise(program, &clean, &noise, &targets).expect("noise keeps the schema");
    AlignmentPair { instance: Instance { program: program.clone(), facts: noisy }, gold, concepts }
}

impl AlignmentPair {
    /// Evidence plus the gold labels of every candidate pair.
    pub fn observed(&self) -> Interpretation {
        let facts = &self.instance.facts;
        let mut interp = self.instance.evidence();
        for i in 0..self.concepts {
            for j in 0..self.concepts {
                let atom = facts.find_atom("similar", &[&format!("x{i}"), &format!("y{j}")]).expect("known concepts");
                interp.set_query(atom, if i == j { TruthValue::ONE } else { TruthValue::ZERO }).unwrap();
            }
        }
        interp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentOutcome {
    pub f1_sets: f64,
    pub f1_set_free: f64,
}

/// Learns weights on one noisy pair and scores thresholded MAP alignments
/// on an independent pair, once with the set program and once with its
/// set-free rewriting.
pub fn alignment_trial(
    seed: u64,
    attribute_noise: f64,
    structural_noise: f64,
    concepts: usize,
    config: &LearningConfig,
) -> Result<AlignmentOutcome, InferenceError> {
    let sets = parse_program(ALIGNMENT_PROGRAM).expect("alignment program");
    let set_free = desugar_sets(&sets);
    let noise = |s: u64| NoiseSpec { attribute_noise, structural_noise, seed: s };
    let registry = SimilarityRegistry::default();
    let mut f1 = [0.0; 2];
    for (slot, program) in [&sets, &set_free].into_iter().enumerate() {
        let train = alignment_pair(seed, concepts, noise(seed ^ 0x5eed), program);
        let test = alignment_pair(seed.wrapping_add(7_919), concepts, noise(seed.wrapping_add(7_919) ^ 0x5eed), program);
        let ctx = train.instance.context(&registry);
        let learned = learn_weights(&ctx, &train.instance.evidence(), &train.observed(), config)?;
        let tuned = program.with_soft_weights(&learned.weights);
        let ctx = test.instance.context_for(&tuned, &registry);
        let map = map_inference(&ctx, &test.instance.evidence(), &config.inference)?;
        let predicted = threshold_decisions(&map.interpretation, &test.instance.facts, 0.5);
        f1[slot] = f1_score(&predicted, &test.gold).f1;
    }
    Ok(AlignmentOutcome { f1_sets: f1[0], f1_set_free: f1[1] })
}

/// Two parents with `k` children each; the set rule and its rewriting.
pub fn grounding_count_instance(k: usize) -> (Instance, Instance) {
    let sets = parse_program(
        "closed src1(concept). closed src2(concept). closed child(concept, concept). open similar(concept, concept).
1 : src1(A) & src2(B) & setsim[similar]({A.child}, {B.child}) => similar(A, B) .",
    )
    .expect("set program");
    let mut facts = String::from("src1\tp\nsrc2\tq\n");
    for i in 0..k {
        writeln!(facts, "child\tp\tp{i}\nchild\tq\tq{i}").unwrap();
    }
    let set_instance = Instance { facts: FactSet::from_str(&sets, &facts).unwrap(), program: sets.clone() };
    let free = desugar_sets(&sets);
    let free_instance = Instance { facts: FactSet::from_str(&free, &facts).unwrap(), program: free };
    (set_instance, free_instance)
}

/// A category program sized to roughly `rules` ground rules.
pub fn scaling_instance(seed: u64, rules: usize) -> Instance {
    // per document: 4 labels x (4 link groundings + 1 prior) + ~2 attributes
    let documents = (rules / 22).max(2);
    let mut rng = rng(seed);
    let labels = 4;
    let mut text = String::from("closed attr(doc, label). closed link(doc, doc). open cat(doc, label).\n");
    text.push_str("2 : attr(A, C) => cat(A, C) .\n1 : link(A, B) & cat(B, C) => cat(A, C) .\n0.3 : ~cat(A, C) .\n");
    text.push_str("EXCLUSIVE : cat(A, *) .\n");
    let mut facts = String::new();
    for d in 0..documents {
        for l in 0..labels {
            if l == 0 || rng.gen_bool(0.35) {
                writeln!(facts, "attr\td{d}\tl{}\t{:.2}", (l + d) % labels, rng.gen_range(0.1..1.0)).unwrap();
            }
        }
        let mut targets: Vec<usize> = Vec::new();
        while targets.len() < 4 {
            let t = rng.gen_range(0..documents);
            if t != d && !targets.contains(&t) {
                targets.push(t);
            }
            if documents <= 4 {
                break;
            }
        }
        for t in targets {
            writeln!(facts, "link\td{d}\td{t}").unwrap();
        }
    }
    Instance::parse(&text, &facts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(tiny_program(3).facts.to_tsv(), tiny_program(3).facts.to_tsv());
        assert_eq!(tiny_program(3).program, tiny_program(3).program);
        assert_eq!(relational_program(9).program, relational_program(9).program);
    }

    #[test]
    fn tiny_programs_stay_small() {
        let registry = SimilarityRegistry::default();
        for seed in 0..50 {
            let inst = tiny_program(seed);
            let ctx = inst.context(&registry);
            let rules = ctx.ground_all(&inst.evidence()).unwrap();
            assert!(rules.len() <= 12);
        }
    }

    #[test]
    fn desugared_rule_has_k_squared_groundings() {
        let registry = SimilarityRegistry::default();
        for k in [1, 3] {
            let (sets, free) = grounding_count_instance(k);
            assert_eq!(sets.context(&registry).grounding_counts(&sets.evidence()).unwrap(), vec![1]);
            assert_eq!(free.context(&registry).grounding_counts(&free.evidence()).unwrap(), vec![k * k]);
        }
    }
}
