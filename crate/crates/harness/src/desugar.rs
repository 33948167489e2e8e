//! Rewrites set-similarity literals into element-level rules.
//!
//! `setsim[p]({X.r}, {Y.q})` becomes `r(X, I) & q(Y, J)` in the body plus
//! `p(I, J)` in place of the set literal, so the rule quantifies over member
//! pairs. Paths of length two or more introduce one fresh variable per hop;
//! a union of paths yields one rule per combination of branches.

use std::collections::BTreeSet;

use psl_core::program::{Literal, LiteralKind, Rule, SetExpression, Term};
use psl_core::Program;

struct Fresh {
    taken: BTreeSet<String>,
    next: usize,
}

impl Fresh {
    fn new(rule: &Rule) -> Self {
        let taken = rule.literals().flat_map(|l| l.variables()).map(str::to_string).collect();
        Fresh { taken, next: 1 }
    }

    fn variable(&mut self) -> String {
        loop {
            let name = format!("M{}", self.next);
            self.next += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// Path atoms binding a fresh member variable of one set branch.
fn expand_path(branch: &SetExpression, fresh: &mut Fresh) -> (Vec<Literal>, String) {
    let mut atoms = Vec::new();
    let mut from = branch.anchor.clone();
    for relation in &branch.path {
        let to = fresh.variable();
        atoms.push(Literal::atom(relation.clone(), vec![Term::variable(from), Term::variable(to.clone())]));
        from = to;
    }
    (atoms, from)
}

/// The branch choice for every set literal of a rule, in literal order.
fn combinations(counts: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for &(left, right) in counts {
        let mut next = Vec::new();
        for prefix in &out {
            for l in 0..left {
                for r in 0..right {
                    let mut choice = prefix.clone();
                    choice.push((l, r));
                    next.push(choice);
                }
            }
        }
        out = next;
    }
    out
}

fn desugar_rule(rule: &Rule) -> Vec<Rule> {
    let counts: Vec<(usize, usize)> = rule
        .literals()
        .filter_map(|l| match &l.kind {
            LiteralKind::SetSimilarity { left, right, .. } => Some((left.branches().len(), right.branches().len())),
            _ => None,
        })
        .collect();
    if counts.is_empty() {
        return vec![rule.clone()];
    }
    combinations(&counts)
        .into_iter()
        .map(|choice| {
            let mut fresh = Fresh::new(rule);
            let mut choice = choice.into_iter();
            let mut rewrite = |literal: &Literal, extra: &mut Vec<Literal>| -> Literal {
                let LiteralKind::SetSimilarity { member, left, right } = &literal.kind else {
                    return literal.clone();
                };
                let (l, r) = choice.next().expect("one choice per set literal");
                let (left_path, i) = expand_path(left.branches()[l], &mut fresh);
                let (right_path, j) = expand_path(right.branches()[r], &mut fresh);
                extra.extend(left_path);
                extra.extend(right_path);
                let mut atom = Literal::atom(member.clone(), vec![Term::variable(i), Term::variable(j)]);
                atom.negated = literal.negated;
                atom
            };
            let mut body = Vec::new();
            for literal in &rule.body {
                let mut extra = Vec::new();
                let replaced = rewrite(literal, &mut extra);
                body.extend(extra);
                body.push(replaced);
            }
            let mut head_paths = Vec::new();
            let head: Vec<Literal> = rule.head.iter().map(|l| rewrite(l, &mut head_paths)).collect();
            body.extend(head_paths);
            let mut out = Rule { body, head, weight: rule.weight, source: String::new() };
            out.source = out.to_string();
            out
        })
        .collect()
}

/// The set-free counterpart of `program`. Programs without set literals are
/// returned unchanged.
pub fn desugar_sets(program: &Program) -> Program {
    let mut out = program.clone();
    out.rules = program.rules.iter().flat_map(desugar_rule).collect();
    out
}

pub fn has_set_literals(program: &Program) -> bool {
    program
        .rules
        .iter()
        .flat_map(Rule::literals)
        .any(|l| matches!(l.kind, LiteralKind::SetSimilarity { .. }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use psl_core::parse_program;
    use psl_core::program::validate_program;

    const DECLS: &str = "closed editor/2. closed sub/2. closed links/2. open similar/2. open same/2.\n";

    fn rules(program: &Program) -> Vec<String> {
        program.rules.iter().map(|r| r.to_string()).collect()
    }

    #[test]
    fn body_set_becomes_member_pairs() {
        let p = parse_program(&format!("{DECLS}0.5 : setsim[similar]({{A.editor}}, {{B.editor}}) => same(A, B) .")).unwrap();
        let d = desugar_sets(&p);
        assert_eq!(rules(&d), vec!["0.5 : editor(A, M1) & editor(B, M2) & similar(M1, M2) => same(A, B) ."]);
        assert!(validate_program(&d).is_empty());
        assert!(!has_set_literals(&d));
    }

    #[test]
    fn head_set_moves_paths_to_body() {
        let p = parse_program(&format!("{DECLS}1 : similar(C, D) => setsim[similar]({{C.sub}}, {{D.sub}}) .")).unwrap();
        let d = desugar_sets(&p);
        assert_eq!(rules(&d), vec!["1 : similar(C, D) & sub(C, M1) & sub(D, M2) => similar(M1, M2) ."]);
    }

    #[test]
    fn unions_and_long_paths_split_into_rules() {
        let p = parse_program(&format!(
            "{DECLS}0.6 : setsim[similar]({{A.links}} ++ {{A.links.links}}, {{B.links}}) => similar(A, B) ."
        ))
        .unwrap();
        let d = desugar_sets(&p);
        assert_eq!(
            rules(&d),
            vec![
                "0.6 : links(A, M1) & links(B, M2) & similar(M1, M2) => similar(A, B) .",
                "0.6 : links(A, M1) & links(M1, M2) & links(B, M3) & similar(M2, M3) => similar(A, B) .",
            ]
        );
    }

    #[test]
    fn fresh_names_avoid_existing_variables() {
        let p = parse_program(&format!("{DECLS}1 : similar(M1, M2) & setsim[similar]({{M1.sub}}, {{M2.sub}}) => same(M1, M2) .")).unwrap();
        let d = desugar_sets(&p);
        assert_eq!(rules(&d), vec!["1 : similar(M1, M2) & sub(M1, M3) & sub(M2, M4) & similar(M3, M4) => same(M1, M2) ."]);
    }

    #[test]
    fn set_free_program_is_unchanged() {
        let p = parse_program(&format!("{DECLS}1 : similar(A, B) => same(A, B) .\nHARD : same(A, B) & same(B, C) => same(A, C) .")).unwrap();
        assert_eq!(desugar_sets(&p), p);
    }
}
