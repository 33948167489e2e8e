//! Seeded attribute and structural noise.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psl_core::{FactSet, GroundAtom, Program, StoreError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Fraction of attribute values replaced by random strings.
    pub attribute_noise: f64,
    /// Fraction of relation facts removed.
    pub structural_noise: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("attribute", self.attribute_noise), ("structural", self.structural_noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} noise must lie in [0, 1], found {v}"));
            }
        }
        Ok(())
    }
}

/// Which predicates count as attributes (last argument is a string value)
/// and which as relations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoiseTargets {
    pub attributes: Vec<String>,
    pub relations: Vec<String>,
}

impl NoiseTargets {
    /// Closed predicates whose last argument is typed `string` are
    /// attributes; every other closed predicate of arity 2 is a relation.
    pub fn infer(program: &Program) -> Self {
        let mut targets = NoiseTargets::default();
        for decl in program.schema.iter().filter(|d| d.closed) {
            if decl.arg_types.last().and_then(|t| t.as_deref()) == Some("string") {
                targets.attributes.push(decl.name.clone());
            } else if decl.arity() == 2 {
                targets.relations.push(decl.name.clone());
            }
        }
        targets
    }
}

fn sorted_facts(facts: &FactSet, predicates: &[String]) -> Vec<(GroundAtom, f64)> {
    let mut out: Vec<(GroundAtom, f64)> = predicates
        .iter()
        .filter_map(|p| facts.predicate_id(p))
        .flat_map(|pid| facts.facts(pid))
        .collect();
    out.sort_by_cached_key(|(a, _)| facts.atom_key(a));
    out
}

fn random_word(rng: &mut ChaCha8Rng, length: usize) -> String {
    (0..length).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

/// A copy of `facts` with `floor(a * #attributes)` attribute values replaced
/// by random lowercase strings of the same length and
/// `floor(s * #relations)` relation facts removed.
pub fn generate_noise(
    program: &Program,
    facts: &FactSet,
    spec: &NoiseSpec,
    targets: &NoiseTargets,
) -> Result<FactSet, StoreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let attributes = sorted_facts(facts, &targets.attributes);
    let relations = sorted_facts(facts, &targets.relations);
    let replaced = (spec.attribute_noise * attributes.len() as f64).floor() as usize;
    let removed = (spec.structural_noise * relations.len() as f64).floor() as usize;
    let mut replace = vec![false; attributes.len()];
    for i in sample(&mut rng, attributes.len(), replaced) {
        replace[i] = true;
    }
    let mut drop = vec![false; relations.len()];
    for i in sample(&mut rng, relations.len(), removed) {
        drop[i] = true;
    }

    let mut changed: std::collections::HashMap<GroundAtom, Option<String>> = Default::default();
    for (i, (atom, _)) in attributes.iter().enumerate() {
        if replace[i] {
            let last = *atom.args.last().expect("attributes have a value argument");
            let length = facts.entity_name(last).chars().count();
            changed.insert(atom.clone(), Some(random_word(&mut rng, length)));
        }
    }
    for (i, (atom, _)) in relations.iter().enumerate() {
        if drop[i] {
            changed.insert(atom.clone(), None);
        }
    }

    let mut out = FactSet::new(program);
    for decl in facts.schema() {
        let pid = facts.predicate_id(&decl.name).expect("declared predicate");
        let mut rows: Vec<(GroundAtom, f64)> = facts.facts(pid).collect();
        rows.sort_by_cached_key(|(a, _)| facts.atom_key(a));
        for (atom, value) in rows {
            let mut args: Vec<String> = atom.args.iter().map(|e| facts.entity_name(*e).to_string()).collect();
            match changed.get(&atom) {
                Some(None) => continue,
                Some(Some(word)) => *args.last_mut().unwrap() = word.clone(),
                None => {}
            }
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            out.insert(&decl.name, &refs, value)?;
        }
    }
    Ok(out)
}
