//! Attribute similarity functions and set-similarity aggregation.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use thiserror::Error;

use crate::truth::TruthValue;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("unknown similarity function `{0}`")]
    Unknown(String),
    #[error("similarity `{name}` returned {value}, outside [0, 1]")]
    OutOfRange { name: String, value: f64 },
    #[error("negative weight {0} in a cosine vector")]
    NegativeWeight(f64),
}

/// `1 - edit_distance / max_len` on case-folded strings; 1 when both are empty.
pub fn levenshtein_sim(a: &str, b: &str) -> TruthValue {
    let a: Vec<char> = a.to_lowercase().chars().collect();
    let b: Vec<char> = b.to_lowercase().chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return TruthValue::ONE;
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = diagonal + usize::from(ca != cb);
            diagonal = row[j + 1];
            row[j + 1] = substitution.min(row[j] + 1).min(row[j + 1] + 1);
        }
    }
    TruthValue::saturating(1.0 - row[b.len()] as f64 / longest as f64)
}

fn bigrams(s: &str) -> HashMap<(char, char), usize> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = HashMap::new();
    for pair in chars.windows(2) {
        *out.entry((pair[0], pair[1])).or_insert(0) += 1;
    }
    out
}

/// Dice coefficient over character-bigram multisets.
pub fn dice_sim(a: &str, b: &str) -> TruthValue {
    let (x, y) = (bigrams(a), bigrams(b));
    let (nx, ny): (usize, usize) = (x.values().sum(), y.values().sum());
    match (nx, ny) {
        (0, 0) => TruthValue::ONE,
        (0, _) | (_, 0) => TruthValue::ZERO,
        _ => {
            let shared: usize = x
                .iter()
                .map(|(gram, count)| y.get(gram).map_or(0, |other| (*count).min(*other)))
                .sum();
            TruthValue::saturating(2.0 * shared as f64 / (nx + ny) as f64)
        }
    }
}

/// Cosine of two sparse nonnegative vectors; 0 when either has zero norm.
pub fn cosine_sim<K: Eq + Hash>(u: &HashMap<K, f64>, v: &HashMap<K, f64>) -> Result<TruthValue, SimilarityError> {
    if let Some(w) = u.values().chain(v.values()).find(|w| **w < 0.0 || w.is_nan()) {
        return Err(SimilarityError::NegativeWeight(*w));
    }
    let norm = |x: &HashMap<K, f64>| x.values().map(|w| w * w).sum::<f64>().sqrt();
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Ok(TruthValue::ZERO);
    }
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let dot: f64 = small.iter().map(|(k, w)| w * large.get(k).copied().unwrap_or(0.0)).sum();
    Ok(TruthValue::saturating(dot / (nu * nv)))
}

/// Reads `token:weight token:weight ...`; any other text is treated as a
/// bag of lowercase words.
pub fn parse_sparse_vector(text: &str) -> Result<HashMap<String, f64>, SimilarityError> {
    let mut out = HashMap::new();
    let weighted: Option<Vec<(&str, f64)>> = text
        .split_whitespace()
        .map(|tok| {
            let (key, weight) = tok.rsplit_once(':')?;
            Some((key, weight.parse().ok()?))
        })
        .collect();
    match weighted {
        Some(pairs) => {
            for (key, weight) in pairs {
                if weight < 0.0 {
                    return Err(SimilarityError::NegativeWeight(weight));
                }
                *out.entry(key.to_string()).or_insert(0.0) += weight;
            }
        }
        None => {
            for word in text.split_whitespace() {
                *out.entry(word.to_lowercase()).or_insert(0.0) += 1.0;
            }
        }
    }
    Ok(out)
}

pub type SimilarityFn = Arc<dyn Fn(&str, &str) -> f64 + Send + Sync>;

/// Named similarity functions available to `fn[name](X, Y)` literals.
#[derive(Clone)]
pub struct SimilarityRegistry {
    functions: HashMap<String, SimilarityFn>,
}

impl fmt::Debug for SimilarityRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<&String> = self.functions.keys().collect();
        names.sort();
        f.debug_struct("SimilarityRegistry").field("functions", &names).finish()
    }
}

impl Default for SimilarityRegistry {
    fn default() -> Self {
        let mut registry = SimilarityRegistry::empty();
        registry.register("levenshtein", |a, b| levenshtein_sim(a, b).get());
        registry.register("dice", |a, b| dice_sim(a, b).get());
        registry.register("cosine", |a, b| {
            match (parse_sparse_vector(a), parse_sparse_vector(b)) {
                (Ok(u), Ok(v)) => cosine_sim(&u, &v).map_or(f64::NAN, TruthValue::get),
                _ => f64::NAN,
            }
        });
        registry
    }
}

impl SimilarityRegistry {
    pub fn empty() -> Self {
        SimilarityRegistry { functions: HashMap::new() }
    }

    pub fn register<F>(&mut self, name: impl Into<String>, function: F)
    where
        F: Fn(&str, &str) -> f64 + Send + Sync + 'static,
    {
        self.functions.insert(name.into(), Arc::new(function));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    pub fn evaluate(&self, name: &str, a: &str, b: &str) -> Result<TruthValue, SimilarityError> {
        let function = self.functions.get(name).ok_or_else(|| SimilarityError::Unknown(name.into()))?;
        let value = function(a, b);
        TruthValue::new(value).map_err(|_| SimilarityError::OutOfRange { name: name.into(), value })
    }
}

/// How the pair sum of a set similarity is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SetNormalizer {
    /// Divide by `|A| + |B|`.
    #[default]
    SumOfSizes,
    /// Divide by `|A| * |B|`, the mean pairwise similarity.
    ProductOfSizes,
}

/// Value of one member pair: either known or an open atom.
#[derive(Debug, Clone, PartialEq)]
pub enum MemberValue<A> {
    Constant(f64),
    Variable(A),
}

/// `min(1, constant + sum(coefficient * v(atom)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SetSimilarityExpression<A> {
    pub pairs: Vec<(A, f64)>,
    pub constant: f64,
    pub clamp_to_unit: bool,
}

impl<A> SetSimilarityExpression<A> {
    pub fn zero() -> Self {
        SetSimilarityExpression { pairs: Vec::new(), constant: 0.0, clamp_to_unit: true }
    }

    /// The unclamped linear value.
    pub fn raw<F: Fn(&A) -> f64>(&self, value: F) -> f64 {
        self.pairs.iter().fold(self.constant, |acc, (a, c)| acc + c * value(a))
    }

    pub fn value<F: Fn(&A) -> f64>(&self, value: F) -> f64 {
        let raw = self.raw(value);
        if self.clamp_to_unit {
            raw.min(1.0)
        } else {
            raw
        }
    }

    /// Largest value the raw expression can take with every variable in `[0, 1]`.
    pub fn raw_upper_bound(&self) -> f64 {
        self.pairs.iter().fold(self.constant, |acc, (_, c)| acc + c.max(0.0))
    }
}

/// Aggregates member-pair similarities of two sets. Either set empty gives
/// the constant 0.
pub fn build_set_sim_expression<E, A, F>(
    set_a: &[E],
    set_b: &[E],
    normalizer: SetNormalizer,
    mut member: F,
) -> SetSimilarityExpression<A>
where
    F: FnMut(&E, &E) -> MemberValue<A>,
{
    if set_a.is_empty() || set_b.is_empty() {
        return SetSimilarityExpression::zero();
    }
    let denominator = match normalizer {
        SetNormalizer::SumOfSizes => (set_a.len() + set_b.len()) as f64,
        SetNormalizer::ProductOfSizes => (set_a.len() * set_b.len()) as f64,
    };
    let coefficient = 1.0 / denominator;
    let mut expr = SetSimilarityExpression::zero();
    let mut known = 0.0;
    for i in set_a {
        for j in set_b {
            match member(i, j) {
                MemberValue::Constant(v) => known += v,
                MemberValue::Variable(atom) => expr.pairs.push((atom, coefficient)),
            }
        }
    }
    expr.constant = known * coefficient;
    expr
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn levenshtein() {
        assert_eq!(levenshtein_sim("Paper", "paper").get(), 1.0);
        assert!(close(levenshtein_sim("abc", "abd").get(), 2.0 / 3.0));
        assert_eq!(levenshtein_sim("", "abc").get(), 0.0);
        assert_eq!(levenshtein_sim("", "").get(), 1.0);
        assert!(close(levenshtein_sim("kitten", "sitting").get(), 1.0 - 3.0 / 7.0));
    }

    #[test]
    fn dice() {
        assert!(close(dice_sim("night", "nacht").get(), 0.25));
        assert_eq!(dice_sim("hello", "hello").get(), 1.0);
        assert_eq!(dice_sim("ab", "cd").get(), 0.0);
        assert_eq!(dice_sim("a", "").get(), 1.0);
        assert_eq!(dice_sim("a", "ab").get(), 0.0);
        // multiset: "aaa" has {aa, aa}, "aa" has {aa}
        assert!(close(dice_sim("aaa", "aa").get(), 2.0 / 3.0));
    }

    #[test]
    fn cosine() {
        let v = |pairs: &[(&'static str, f64)]| pairs.iter().copied().collect::<HashMap<_, _>>();
        let u = v(&[("x", 1.0), ("y", 1.0)]);
        assert!(close(cosine_sim(&u, &u).unwrap().get(), 1.0));
        assert_eq!(cosine_sim(&v(&[("x", 1.0)]), &v(&[("y", 2.0)])).unwrap().get(), 0.0);
        assert!(close(cosine_sim(&u, &v(&[("x", 1.0), ("z", 1.0)])).unwrap().get(), 0.5));
        assert!(cosine_sim(&v(&[("x", -1.0)]), &u).is_err());
        assert_eq!(cosine_sim(&v(&[]), &u).unwrap().get(), 0.0);
    }

    #[test]
    fn registry() {
        let registry = SimilarityRegistry::default();
        assert_eq!(registry.evaluate("levenshtein", "A", "a").unwrap().get(), 1.0);
        assert!(close(registry.evaluate("cosine", "x:1 y:1", "x:1 z:1").unwrap().get(), 0.5));
        assert!(close(registry.evaluate("cosine", "red fox", "Red dog").unwrap().get(), 0.5));
        assert!(matches!(registry.evaluate("nope", "", ""), Err(SimilarityError::Unknown(_))));
        let mut registry = registry;
        registry.register("broken", |_, _| 2.0);
        assert!(matches!(
            registry.evaluate("broken", "", ""),
            Err(SimilarityError::OutOfRange { .. })
        ));
    }

    #[test]
    fn set_similarity() {
        let sp = |i: &&str, j: &&str| match (*i, *j) {
            ("d1", "d3") => MemberValue::<()>::Constant(1.0),
            ("d2", "d3") => MemberValue::Constant(0.5),
            _ => MemberValue::Constant(1.0),
        };
        let e = build_set_sim_expression(&["d1", "d2"], &["d3"], SetNormalizer::SumOfSizes, sp);
        assert!(close(e.value(|_| 0.0), 0.5));

        let all = |_: &&str, _: &&str| MemberValue::<()>::Constant(1.0);
        let e = build_set_sim_expression(&["a", "b"], &["a", "b"], SetNormalizer::SumOfSizes, all);
        assert!(close(e.value(|_| 0.0), 1.0));
        let e = build_set_sim_expression(
            &["a1", "a2", "a3"],
            &["b1", "b2", "b3"],
            SetNormalizer::SumOfSizes,
            all,
        );
        assert!(close(e.raw(|_| 0.0), 1.5));
        assert_eq!(e.value(|_| 0.0), 1.0);

        let e = build_set_sim_expression::<&str, (), _>(&[], &["b"], SetNormalizer::SumOfSizes, all);
        assert_eq!(e.value(|_| 0.0), 0.0);
    }

    #[test]
    fn set_similarity_with_variables() {
        let e = build_set_sim_expression(&[0, 1], &[0], SetNormalizer::SumOfSizes, |i, j| {
            MemberValue::Variable((*i, *j))
        });
        assert_eq!(e.pairs.len(), 2);
        assert!(close(e.raw(|_| 0.6), 0.4));
        assert!(close(e.raw_upper_bound(), 2.0 / 3.0));
    }
}
