use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use psl_core::program::SetExpression;
use psl_core::{parse_program, FactSet, Interpretation, Program, TruthValue};

const SCHEMA: &str = "closed link/2. closed tag(doc, label). closed score/1. open same/2.";

fn program() -> Program {
    parse_program(SCHEMA).unwrap()
}

type Facts = BTreeMap<(String, Vec<String>), f64>;

fn entity() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(str::to_string)
}

fn facts() -> impl Strategy<Value = Facts> {
    let value = prop_oneof![Just(1.0), Just(0.0), (1..100u32).prop_map(|k| k as f64 / 100.0)];
    let fact = prop_oneof![
        (entity(), entity()).prop_map(|(a, b)| ("link".to_string(), vec![a, b])),
        (entity(), entity()).prop_map(|(a, b)| ("tag".to_string(), vec![a, b])),
        entity().prop_map(|a| ("score".to_string(), vec![a])),
    ];
    prop::collection::btree_map(fact, value, 0..25)
}

fn lines(facts: &Facts) -> Vec<String> {
    facts.iter().map(|((p, args), v)| format!("{p}\t{}\t{v}", args.join("\t"))).collect()
}

proptest! {
    #[test]
    fn load_order_does_not_matter(facts in facts(), seed in any::<u64>()) {
        let forward = lines(&facts);
        let mut shuffled = forward.clone();
        // deterministic permutation driven by the seed
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let p = program();
        let a = FactSet::from_str(&p, &(forward.join("\n") + "\n")).unwrap();
        let b = FactSet::from_str(&p, &(shuffled.join("\n") + "\n")).unwrap();
        prop_assert_eq!(a.len(), facts.len());
        prop_assert_eq!(a.to_tsv(), b.to_tsv());
        let again = FactSet::from_str(&p, &a.to_tsv()).unwrap();
        prop_assert_eq!(again.to_tsv(), a.to_tsv());
    }

    #[test]
    fn index_lookups_match_a_scan(facts in facts(), first in prop::option::of(entity()), second in prop::option::of(entity())) {
        let p = program();
        let store = FactSet::from_str(&p, &(lines(&facts).join("\n") + "\n")).unwrap();
        let pattern = [first.as_deref(), second.as_deref()];
        let mut got: Vec<(Vec<String>, f64)> = store
            .query("link", &pattern)
            .unwrap()
            .into_iter()
            .map(|(atom, v)| (store.atom_key(&atom).1, v.get()))
            .collect();
        got.sort_by(|x, y| x.0.cmp(&y.0));
        let expected: Vec<(Vec<String>, f64)> = facts
            .iter()
            .filter(|((pred, args), _)| {
                pred == "link" && pattern.iter().zip(args).all(|(p, a)| p.map_or(true, |p| p == a))
            })
            .map(|((_, args), v)| (args.clone(), *v))
            .collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn two_hop_sets_match_a_scan(facts in facts(), anchor in entity()) {
        let p = program();
        let store = FactSet::from_str(&p, &(lines(&facts).join("\n") + "\n")).unwrap();
        let Some(id) = store.entity(&anchor) else { return Ok(()); };
        let expr = SetExpression::new("X", vec!["link".into()]).union(SetExpression::new("X", vec!["link".into(), "link".into()]));
        let got: BTreeSet<String> = store
            .materialize_set(&expr, id)
            .unwrap()
            .into_iter()
            .map(|e| store.entity_name(e).to_string())
            .collect();
        let step = |from: &BTreeSet<String>| -> BTreeSet<String> {
            facts
                .iter()
                .filter(|((pred, args), v)| pred == "link" && **v > 0.0 && from.contains(&args[0]))
                .map(|((_, args), _)| args[1].clone())
                .collect()
        };
        let one = step(&BTreeSet::from([anchor.clone()]));
        let two = step(&one);
        let expected: BTreeSet<String> = one.union(&two).cloned().collect();
        prop_assert_eq!(got, expected);
    }
}

#[test]
fn removal_updates_indexes() {
    let p = program();
    let mut store = FactSet::from_str(&p, "link\ta\tb\nlink\ta\tc\t0.5\n").unwrap();
    let atom = store.find_atom("link", &["a", "b"]).unwrap();
    assert!(store.remove(&atom));
    assert!(!store.remove(&atom));
    let left = store.query("link", &[Some("a"), None]).unwrap();
    assert_eq!(left.len(), 1);
    assert_eq!(left[0].1.get(), 0.5);
    assert!(store.query("link", &[None, Some("b")]).unwrap().is_empty());
}

#[test]
fn malformed_fact_lines_are_rejected() {
    let p = program();
    for bad in ["link\ta\n", "nope\ta\n", "score\ta\t1.5\n", "score\ta\tx\n"] {
        assert!(FactSet::from_str(&p, bad).is_err(), "{bad:?}");
    }
}

#[test]
fn typed_domains_and_interpretations() {
    let p = program();
    let store = FactSet::from_str(&p, "tag\td1\tx\ntag\td2\ty\nlink\td3\td1\nsame\td2\td3\t0.5\n").unwrap();
    let docs: Vec<&str> = store.type_domain("doc").into_iter().map(|e| store.entity_name(e)).collect();
    assert_eq!(docs, vec!["d1", "d2"]);
    let mut interp = Interpretation::from_facts(&store);
    let mut store = store;
    let same = store.atom("same", &["d1", "d2"]).unwrap();
    interp.set_query(same.clone(), TruthValue::new(0.25).unwrap()).unwrap();
    // stored facts of open predicates are evidence
    let observed = store.find_atom("same", &["d2", "d3"]).unwrap();
    assert_eq!(interp.value(&observed), Some(0.5));
    assert!(interp.set_query(observed, TruthValue::new(0.1).unwrap()).is_err());
    assert_eq!(interp.query_tsv(&store), "same\td1\td2\t0.250000\n");
}
