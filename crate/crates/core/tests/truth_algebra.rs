use proptest::prelude::*;
use psl_core::truth::{
    clause_distance_form, clause_truth, implication_distance, negate, tconorm, tnorm, Lukasiewicz, SignedLiteral,
    TruthAlgebra,
};
use psl_core::TruthValue;

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

fn tv(v: f64) -> TruthValue {
    TruthValue::new(v).unwrap()
}

proptest! {
    #[test]
    fn operators_match_closed_forms(a in unit(), b in unit()) {
        prop_assert!((tnorm(a, b).unwrap().get() - (a + b - 1.0).max(0.0)).abs() <= 1e-12);
        prop_assert!((tconorm(a, b).unwrap().get() - (a + b).min(1.0)).abs() <= 1e-12);
        prop_assert_eq!(negate(a).unwrap().get(), 1.0 - a);
    }

    #[test]
    fn commutative_and_bounded(a in unit(), b in unit()) {
        prop_assert_eq!(tnorm(a, b).unwrap(), tnorm(b, a).unwrap());
        prop_assert_eq!(tconorm(a, b).unwrap(), tconorm(b, a).unwrap());
        prop_assert!(tnorm(a, b).unwrap().get() <= a.min(b) + 1e-12);
        prop_assert!(tconorm(a, b).unwrap().get() >= a.max(b) - 1e-12);
    }

    #[test]
    fn associative(a in unit(), b in unit(), c in unit()) {
        let left = Lukasiewicz::tnorm(Lukasiewicz::tnorm(tv(a), tv(b)), tv(c)).get();
        let right = Lukasiewicz::tnorm(tv(a), Lukasiewicz::tnorm(tv(b), tv(c))).get();
        prop_assert!((left - right).abs() <= 1e-12);
        let left = Lukasiewicz::tconorm(Lukasiewicz::tconorm(tv(a), tv(b)), tv(c)).get();
        let right = Lukasiewicz::tconorm(tv(a), Lukasiewicz::tconorm(tv(b), tv(c))).get();
        prop_assert!((left - right).abs() <= 1e-12);
    }

    #[test]
    fn de_morgan(a in unit(), b in unit()) {
        let lhs = negate(tnorm(a, b).unwrap().get()).unwrap().get();
        let rhs = tconorm(1.0 - a, 1.0 - b).unwrap().get();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn monotone(a in unit(), b in unit(), c in unit()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(tnorm(lo, c).unwrap().get() <= tnorm(hi, c).unwrap().get() + 1e-12);
        prop_assert!(tconorm(lo, c).unwrap().get() <= tconorm(hi, c).unwrap().get() + 1e-12);
    }

    #[test]
    fn identities(a in unit()) {
        prop_assert_eq!(tnorm(a, 1.0).unwrap().get(), a);
        prop_assert_eq!(tconorm(a, 0.0).unwrap().get(), a);
    }

    #[test]
    fn implication_equals_clause_distance(body in prop::collection::vec(unit(), 1..5), head in prop::collection::vec(unit(), 0..3)) {
        // body => head is the clause ~b1 | ... | ~bn | h1 | ... | hm
        let mut literals: Vec<SignedLiteral<usize>> = (0..body.len()).map(SignedLiteral::negative).collect();
        literals.extend((0..head.len()).map(|i| SignedLiteral::positive(body.len() + i)));
        let values: Vec<f64> = body.iter().chain(&head).copied().collect();
        let clause = clause_truth(&literals, |&i| Some(values[i])).unwrap();
        let via_clause = 1.0 - clause.get();
        let body_tv: Vec<TruthValue> = body.iter().map(|&v| tv(v)).collect();
        let head_tv: Vec<TruthValue> = head.iter().map(|&v| tv(v)).collect();
        let via_implication = implication_distance(&body_tv, &head_tv);
        prop_assert!((via_clause - via_implication).abs() <= 1e-9);
        let form = clause_distance_form(&literals);
        prop_assert!((form.evaluate(|&i| values[i]).max(0.0) - via_clause).abs() <= 1e-9);
    }
}

#[test]
fn out_of_range_inputs_are_rejected() {
    assert!(tnorm(1.2, 0.5).is_err());
    assert!(tconorm(0.5, -0.1).is_err());
    assert!(negate(f64::NAN).is_err());
    assert!(clause_truth::<usize, _>(&[], |_| Some(0.0)).is_err());
    assert!(clause_truth(&[SignedLiteral::positive(0)], |_| None).is_err());
}

#[test]
fn worked_distances() {
    assert!((implication_distance(&[tv(0.9), tv(0.8)], &[tv(0.3)]) - 0.4).abs() < 1e-12);
    assert_eq!(implication_distance(&[tv(0.2)], &[tv(0.9)]), 0.0);
}
