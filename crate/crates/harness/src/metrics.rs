//! Thresholded decisions and precision / recall / F1.

use std::collections::BTreeSet;
use std::fmt;

use psl_core::{FactSet, GroundAtom, Interpretation};

/// A ground atom by name: predicate and argument constants.
pub type AtomKey = (String, Vec<String>);

/// Atoms judged true.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecisionSet {
    pub positives: BTreeSet<AtomKey>,
}

impl DecisionSet {
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn contains(&self, predicate: &str, args: &[&str]) -> bool {
        let key = (predicate.to_string(), args.iter().map(|a| a.to_string()).collect());
        self.positives.contains(&key)
    }

    /// Keeps only atoms of `predicate`.
    pub fn restrict(&self, predicate: &str) -> DecisionSet {
        DecisionSet { positives: self.positives.iter().filter(|(p, _)| p == predicate).cloned().collect() }
    }

    /// Reads `predicate<TAB>arg...[<TAB>value]` lines; a missing value counts
    /// as 1. `arity` resolves the value column when known; otherwise a final
    /// field that parses as a number in `[0, 1]` is taken as the value.
    pub fn from_tsv(
        text: &str,
        threshold: f64,
        arity: impl Fn(&str) -> Option<usize>,
    ) -> Result<DecisionSet, String> {
        let mut positives = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(format!("line {}: expected a predicate and at least one argument", n + 1));
            }
            let last = fields[fields.len() - 1].parse::<f64>().ok();
            let (args, value) = match (arity(fields[0]), last) {
                (Some(k), _) if fields.len() == k + 1 => (&fields[1..], 1.0),
                (Some(k), Some(v)) if fields.len() == k + 2 => (&fields[1..=k], v),
                (Some(k), _) => {
                    return Err(format!("line {}: `{}` takes {k} arguments", n + 1, fields[0]));
                }
                (None, Some(v)) if fields.len() > 2 && (0.0..=1.0).contains(&v) => (&fields[1..fields.len() - 1], v),
                (None, _) => (&fields[1..], 1.0),
            };
            if value >= threshold {
                positives.insert((fields[0].to_string(), args.iter().map(|a| a.to_string()).collect()));
            }
        }
        Ok(DecisionSet { positives })
    }
}

/// Query atoms of `interp` whose value is at least `threshold`.
pub fn threshold_decisions(interp: &Interpretation, facts: &FactSet, threshold: f64) -> DecisionSet {
    let positives = interp
        .query()
        .iter()
        .filter(|(_, v)| **v >= threshold)
        .map(|(a, _)| facts.atom_key(a))
        .collect();
    DecisionSet { positives }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyCandidates;

impl fmt::Display for EmptyCandidates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no candidates to choose from")
    }
}

impl std::error::Error for EmptyCandidates {}

/// The highest-valued candidate; ties go to the lexicographically smallest
/// atom. Unregistered atoms count as 0.
pub fn argmax_decision(
    interp: &Interpretation,
    facts: &FactSet,
    candidates: &[GroundAtom],
) -> Result<GroundAtom, EmptyCandidates> {
    let value = |a: &GroundAtom| interp.value(a).unwrap_or(0.0);
    let mut best: Option<(&GroundAtom, f64, AtomKey)> = None;
    for atom in candidates {
        let v = value(atom);
        let key = facts.atom_key(atom);
        let better = match &best {
            None => true,
            Some((_, bv, bk)) => v > *bv || (v == *bv && key < *bk),
        };
        if better {
            best = Some((atom, v, key));
        }
    }
    best.map(|(a, _, _)| a.clone()).ok_or(EmptyCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl fmt::Display for Scores {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}\t{:.4}\t{:.4}", self.precision, self.recall, self.f1)
    }
}

/// Precision, recall and their harmonic mean. Two empty sets score 1;
/// an empty side otherwise scores 0 on the affected measure.
pub fn f1_score(predicted: &DecisionSet, gold: &DecisionSet) -> Scores {
    if predicted.is_empty() && gold.is_empty() {
        return Scores { precision: 1.0, recall: 1.0, f1: 1.0 };
    }
    let tp = predicted.positives.intersection(&gold.positives).count() as f64;
    let ratio = |n: usize| if n == 0 { 0.0 } else { tp / n as f64 };
    let precision = ratio(predicted.len());
    let recall = ratio(gold.len());
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Scores { precision, recall, f1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use psl_core::{parse_program, TruthValue};

    fn keys(items: &[&str]) -> DecisionSet {
        DecisionSet { positives: items.iter().map(|s| ("p".to_string(), vec![s.to_string()])).collect() }
    }

    #[test]
    fn threshold_is_inclusive() {
        let program = parse_program("open p/1.").unwrap();
        let mut facts = FactSet::new(&program);
        let mut interp = Interpretation::new();
        for (name, v) in [("a", 0.51), ("b", 0.5), ("c", 0.49)] {
            let atom = facts.atom("p", &[name]).unwrap();
            interp.set_query(atom, TruthValue::new(v).unwrap()).unwrap();
        }
        assert_eq!(threshold_decisions(&interp, &facts, 0.5), keys(&["a", "b"]));
        let zeros = Interpretation::new();
        assert!(threshold_decisions(&zeros, &facts, 0.5).is_empty());
    }

    #[test]
    fn argmax_breaks_ties_lexicographically() {
        let program = parse_program("open has/2.").unwrap();
        let mut facts = FactSet::new(&program);
        let c2 = facts.atom("has", &["d", "cat2"]).unwrap();
        let c1 = facts.atom("has", &["d", "cat1"]).unwrap();
        let mut interp = Interpretation::new();
        interp.set_query(c2.clone(), TruthValue::new(0.5).unwrap()).unwrap();
        interp.set_query(c1.clone(), TruthValue::new(0.5).unwrap()).unwrap();
        assert_eq!(argmax_decision(&interp, &facts, &[c2.clone(), c1.clone()]).unwrap(), c1);
        interp.set_query(c2.clone(), TruthValue::new(0.7).unwrap()).unwrap();
        assert_eq!(argmax_decision(&interp, &facts, &[c1.clone(), c2.clone()]).unwrap(), c2);
        assert_eq!(argmax_decision(&interp, &facts, &[c1.clone()]).unwrap(), c1);
        assert_eq!(argmax_decision(&interp, &facts, &[]), Err(EmptyCandidates));
    }

    #[test]
    fn f1_examples() {
        let gold = keys(&["a", "b", "c", "d"]);
        assert_eq!(f1_score(&gold, &gold), Scores { precision: 1.0, recall: 1.0, f1: 1.0 });
        let half = f1_score(&keys(&["a", "b"]), &gold);
        assert_eq!((half.precision, half.recall), (1.0, 0.5));
        assert!((half.f1 - 2.0 / 3.0).abs() < 1e-15);
        let disjoint = f1_score(&keys(&["x"]), &gold);
        assert_eq!(disjoint, Scores { precision: 0.0, recall: 0.0, f1: 0.0 });
        assert_eq!(f1_score(&keys(&[]), &gold).precision, 0.0);
    }

    #[test]
    fn decision_file_values() {
        let d = DecisionSet::from_tsv("p\ta\t0.7\np\tb\t0.2\nq\tx\ty\n", 0.5, |_| None).unwrap();
        assert!(d.contains("p", &["a"]));
        assert!(!d.contains("p", &["b"]));
        assert!(d.contains("q", &["x", "y"]));
        let typed = DecisionSet::from_tsv("r\ta\t1\n", 0.5, |_| Some(2)).unwrap();
        assert!(typed.contains("r", &["a", "1"]));
        assert!(DecisionSet::from_tsv("r\ta\n", 0.5, |_| Some(2)).is_err());
    }
}
