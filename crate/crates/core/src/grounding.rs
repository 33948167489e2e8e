//! Rule instantiation and the lazily grown set of active ground rules.
//!
//! Each rule is compiled into a template over numbered variables. Bindings
//! come from joining the closed atoms of the rule body (smallest relations
//! first); variables not reached by a join range over the constants of their
//! declared type. When enumerating only violated groundings, body atoms of
//! open predicates also act as join sources, restricted to atoms whose
//! current value is positive: a body atom at 0 satisfies the whole clause.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::program::{normalize_to_clause, LiteralKind, Program, RuleWeight, SetExpression, Term};
use crate::similarity::{
    build_set_sim_expression, MemberValue, SetNormalizer, SetSimilarityExpression, SimilarityError,
    SimilarityRegistry,
};
use crate::store::{EntityId, FactSet, GroundAtom, Interpretation, PredicateId, Relation, StoreError};
use crate::truth::SignedLiteral;

#[derive(Debug, Error)]
pub enum GroundingError {
    #[error("rule {}: variable `{variable}` has no finite domain; bind it with a closed body atom or give its predicate a typed declaration", .rule + 1)]
    UnboundedVariable { rule: usize, variable: String },
    #[error("rule {}: constant `{constant}` is unknown to the fact store", .rule + 1)]
    UnknownConstant { rule: usize, constant: String },
    #[error("rule {}: predicate `{predicate}` is not in the fact store schema", .rule + 1)]
    UnknownPredicate { rule: usize, predicate: String },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// A set-similarity occurrence that still depends on open atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedSet {
    pub negated: bool,
    pub expr: SetSimilarityExpression<GroundAtom>,
}

impl SignedSet {
    /// Contribution to the clause truth.
    pub fn contribution<F: Fn(&GroundAtom) -> f64>(&self, value: F) -> f64 {
        let v = self.expr.value(value);
        if self.negated {
            1.0 - v
        } else {
            v
        }
    }

    fn min_contribution(&self) -> f64 {
        if self.negated {
            1.0 - self.expr.raw_upper_bound().min(1.0)
        } else {
            self.expr.constant.min(1.0)
        }
    }
}

/// One instantiation of a rule as a signed clause over open atoms.
///
/// Its distance from satisfaction is
/// `max(0, constant + sum(coefficient * v(atom)) - sum(set contributions))`,
/// where known atoms, similarities and constant sets are already folded into
/// `constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRule {
    pub rule: usize,
    pub weight: RuleWeight,
    pub binding: Vec<EntityId>,
    /// Clause literals over open, non-evidence atoms.
    pub literals: Vec<SignedLiteral<GroundAtom>>,
    pub sets: Vec<SignedSet>,
    pub constant: f64,
    /// `literals` as a linear form, with repeated atoms merged.
    pub terms: Vec<(GroundAtom, f64)>,
}

impl GroundRule {
    /// The linear piece whose positive part is the distance.
    pub fn piece<F: Fn(&GroundAtom) -> f64>(&self, value: F) -> f64 {
        let linear = self.terms.iter().fold(self.constant, |acc, (a, c)| acc + c * value(a));
        self.sets.iter().fold(linear, |acc, s| acc - s.contribution(&value))
    }

    pub fn distance<F: Fn(&GroundAtom) -> f64>(&self, value: F) -> f64 {
        self.piece(value).max(0.0)
    }

    /// Largest distance over all assignments of the open atoms.
    pub fn max_distance(&self) -> f64 {
        let linear = self.terms.iter().fold(self.constant, |acc, (_, c)| acc + c.max(0.0));
        self.sets.iter().fold(linear, |acc, s| acc - s.min_contribution()).max(0.0)
    }

    /// Every open atom the rule mentions, including set members.
    pub fn atoms(&self) -> impl Iterator<Item = &GroundAtom> {
        self.terms
            .iter()
            .map(|(a, _)| a)
            .chain(self.sets.iter().flat_map(|s| s.expr.pairs.iter().map(|(a, _)| a)))
    }

    pub fn key(&self) -> (usize, Vec<EntityId>) {
        (self.rule, self.binding.clone())
    }
}

/// Ground rules activated so far, indexed by the atoms they contain.
#[derive(Debug, Clone, Default)]
pub struct ActiveSet {
    rules: Vec<GroundRule>,
    keys: HashSet<(usize, Vec<EntityId>)>,
    atom_index: HashMap<GroundAtom, Vec<usize>>,
}

impl ActiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a rule unless the same grounding is already present.
    pub fn insert(&mut self, rule: GroundRule) -> bool {
        if !self.keys.insert(rule.key()) {
            return false;
        }
        let index = self.rules.len();
        let atoms: BTreeSet<&GroundAtom> = rule.atoms().collect();
        for atom in atoms {
            self.atom_index.entry(atom.clone()).or_default().push(index);
        }
        self.rules.push(rule);
        true
    }

    /// Adds all rules; returns how many were new.
    pub fn extend<I: IntoIterator<Item = GroundRule>>(&mut self, rules: I) -> usize {
        let mut added = 0;
        for rule in rules {
            added += usize::from(self.insert(rule));
        }
        added
    }

    pub fn contains(&self, rule: &GroundRule) -> bool {
        self.keys.contains(&rule.key())
    }

    pub fn rules(&self) -> &[GroundRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Active rules containing `atom`.
    pub fn containing(&self, atom: &GroundAtom) -> impl Iterator<Item = &GroundRule> {
        self.atom_index
            .get(atom)
            .into_iter()
            .flat_map(move |ids| ids.iter().map(move |&i| &self.rules[i]))
    }

    /// Open atoms mentioned by active rules, in first-seen order.
    pub fn atoms(&self) -> Vec<GroundAtom> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for rule in &self.rules {
            for atom in rule.atoms() {
                if seen.insert(atom) {
                    out.push(atom.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TTerm {
    Var(usize),
    Const(EntityId),
}

#[derive(Debug, Clone)]
struct TSet {
    /// (anchor variable, relation path) per union branch.
    branches: Vec<(usize, Vec<PredicateId>)>,
}

#[derive(Debug, Clone)]
enum TKind {
    Atom { predicate: PredicateId, args: Vec<TTerm> },
    Sim { function: String, left: TTerm, right: TTerm },
    Set { member: PredicateId, left: TSet, right: TSet },
}

#[derive(Debug, Clone)]
struct TLiteral {
    negated: bool,
    kind: TKind,
}

#[derive(Debug, Clone)]
struct Template {
    rule: usize,
    weight: RuleWeight,
    variables: Vec<String>,
    literals: Vec<TLiteral>,
    guards: Vec<(TTerm, TTerm)>,
    /// Clause-negated closed atoms, smallest relation first.
    closed_sources: Vec<usize>,
    /// Clause-negated open atoms.
    open_sources: Vec<usize>,
    /// Declared type of each variable, if any position it occupies is typed.
    types: Vec<Option<String>>,
}

/// How much of the grounding space to enumerate.
#[derive(Debug, Clone, Copy)]
pub enum Scope<'i> {
    /// Every grounding that is not satisfied for all values of the open atoms.
    All { interp: &'i Interpretation },
    /// Groundings whose distance exceeds `distance_threshold` under current
    /// values. Open body atoms are joined over atoms valued above
    /// `source_threshold`; unregistered open atoms count as 0.
    Violated {
        interp: &'i Interpretation,
        zero_query: bool,
        source_threshold: f64,
        distance_threshold: f64,
    },
}

impl<'i> Scope<'i> {
    fn interp(&self) -> &'i Interpretation {
        match self {
            Scope::All { interp } | Scope::Violated { interp, .. } => interp,
        }
    }
}

/// Open atoms valued above a threshold, indexed like the fact store.
struct ValueIndex {
    relations: HashMap<PredicateId, Relation>,
}

impl ValueIndex {
    fn build(facts: &FactSet, interp: &Interpretation, zero_query: bool, threshold: f64) -> Self {
        let mut relations: HashMap<PredicateId, Relation> = HashMap::new();
        let query = interp.query().iter().filter(|_| !zero_query);
        for (atom, value) in interp.evidence().iter().chain(query) {
            if *value > threshold && !facts.is_closed(atom.predicate) {
                relations
                    .entry(atom.predicate)
                    .or_insert_with(|| Relation::new(atom.args.len()))
                    .insert(atom.args.clone(), *value);
            }
        }
        ValueIndex { relations }
    }

    fn len(&self, predicate: PredicateId) -> usize {
        self.relations.get(&predicate).map_or(0, Relation::len)
    }
}

/// Grounds the rules of one program against one fact store.
pub struct GroundingContext<'a> {
    program: &'a Program,
    facts: &'a FactSet,
    similarity: &'a SimilarityRegistry,
    normalizer: SetNormalizer,
    templates: Vec<Template>,
    similarity_cache: RefCell<HashMap<(String, EntityId, EntityId), f64>>,
    set_cache: RefCell<HashMap<(Vec<PredicateId>, EntityId), Vec<EntityId>>>,
}

impl<'a> GroundingContext<'a> {
    pub fn new(
        program: &'a Program,
        facts: &'a FactSet,
        similarity: &'a SimilarityRegistry,
    ) -> Result<Self, GroundingError> {
        let templates = program
            .rules
            .iter()
            .enumerate()
            .map(|(i, _)| compile(program, facts, similarity, i))
            .collect::<Result<_, _>>()?;
        Ok(GroundingContext {
            program,
            facts,
            similarity,
            normalizer: SetNormalizer::default(),
            templates,
            similarity_cache: RefCell::new(HashMap::new()),
            set_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn with_normalizer(mut self, normalizer: SetNormalizer) -> Self {
        self.normalizer = normalizer;
        self
    }

    pub fn program(&self) -> &'a Program {
        self.program
    }

    pub fn facts(&self) -> &'a FactSet {
        self.facts
    }

    /// All groundings of rule `rule` that evidence does not already satisfy.
    pub fn ground_rule(&self, rule: usize, interp: &Interpretation) -> Result<Vec<GroundRule>, GroundingError> {
        self.enumerate(rule, Scope::All { interp }, None)
    }

    /// [`ground_rule`](Self::ground_rule) over every rule.
    pub fn ground_all(&self, interp: &Interpretation) -> Result<Vec<GroundRule>, GroundingError> {
        let mut out = Vec::new();
        for rule in 0..self.templates.len() {
            out.extend(self.ground_rule(rule, interp)?);
        }
        Ok(out)
    }

    /// Groundings of every rule (or of `rule` only) with positive distance
    /// under the interpretation, where unregistered open atoms are 0.
    pub fn violated(
        &self,
        rule: Option<usize>,
        interp: &Interpretation,
        distance_threshold: f64,
    ) -> Result<Vec<GroundRule>, GroundingError> {
        let scope = Scope::Violated {
            interp,
            zero_query: false,
            source_threshold: 0.0,
            distance_threshold,
        };
        let rules: Vec<usize> = match rule {
            Some(r) => vec![r],
            None => (0..self.templates.len()).collect(),
        };
        let mut out = Vec::new();
        for r in rules {
            out.extend(self.enumerate(r, scope, None)?);
        }
        Ok(out)
    }

    /// Groundings with positive distance when every query atom is 0.
    pub fn initial_active_set(&self, interp: &Interpretation) -> Result<ActiveSet, GroundingError> {
        let scope = Scope::Violated {
            interp,
            zero_query: true,
            source_threshold: 0.0,
            distance_threshold: 0.0,
        };
        let mut active = ActiveSet::new();
        for rule in 0..self.templates.len() {
            active.extend(self.enumerate(rule, scope, None)?);
        }
        Ok(active)
    }

    /// Groundings containing `atom` whose distance is positive under the
    /// current values.
    pub fn activate_for(
        &self,
        atom: &GroundAtom,
        interp: &Interpretation,
        distance_threshold: f64,
    ) -> Result<Vec<GroundRule>, GroundingError> {
        let scope = Scope::Violated {
            interp,
            zero_query: false,
            source_threshold: 0.0,
            distance_threshold,
        };
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for rule in 0..self.templates.len() {
            for seed in self.seeds(rule, atom)? {
                for g in self.enumerate(rule, scope, Some(seed))? {
                    if g.atoms().any(|a| a == atom) && seen.insert(g.key()) {
                        out.push(g);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Number of groundings per rule in [`Scope::All`].
    pub fn grounding_counts(&self, interp: &Interpretation) -> Result<Vec<usize>, GroundingError> {
        (0..self.templates.len()).map(|r| Ok(self.ground_rule(r, interp)?.len())).collect()
    }

    /// Partial bindings under which some literal of `rule` mentions `atom`.
    fn seeds(&self, rule: usize, atom: &GroundAtom) -> Result<Vec<Vec<Option<EntityId>>>, GroundingError> {
        let t = &self.templates[rule];
        let mut out = Vec::new();
        for literal in &t.literals {
            match &literal.kind {
                TKind::Atom { predicate, args } if *predicate == atom.predicate => {
                    let mut binding = vec![None; t.variables.len()];
                    if unify(args, &atom.args, &mut binding) {
                        out.push(binding);
                    }
                }
                TKind::Set { member, left, right } if *member == atom.predicate => {
                    let lefts = self.anchors_reaching(left, atom.args[0])?;
                    let rights = self.anchors_reaching(right, atom.args[1])?;
                    for (lv, l) in &lefts {
                        for (rv, r) in &rights {
                            let mut binding = vec![None; t.variables.len()];
                            binding[*lv] = Some(*l);
                            if binding[*rv].is_some_and(|b| b != *r) {
                                continue;
                            }
                            binding[*rv] = Some(*r);
                            out.push(binding);
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// (anchor variable, entity) pairs whose set contains `member`.
    fn anchors_reaching(&self, set: &TSet, member: EntityId) -> Result<Vec<(usize, EntityId)>, GroundingError> {
        let mut out = Vec::new();
        for (anchor, path) in &set.branches {
            let mut frontier: BTreeSet<EntityId> = BTreeSet::from([member]);
            for relation in path.iter().rev() {
                let mut next = BTreeSet::new();
                for entity in &frontier {
                    let pattern = [None, Some(*entity)];
                    for (args, value) in self.facts.matching(*relation, &pattern) {
                        if value > 0.0 {
                            next.insert(args[0]);
                        }
                    }
                }
                frontier = next;
            }
            out.extend(frontier.into_iter().map(|e| (*anchor, e)));
        }
        Ok(out)
    }

    fn enumerate(
        &self,
        rule: usize,
        scope: Scope<'_>,
        seed: Option<Vec<Option<EntityId>>>,
    ) -> Result<Vec<GroundRule>, GroundingError> {
        let t = &self.templates[rule];
        let values = match scope {
            Scope::Violated { interp, zero_query, source_threshold, .. } if !t.open_sources.is_empty() => {
                Some(ValueIndex::build(self.facts, interp, zero_query, source_threshold))
            }
            _ => None,
        };

        let mut sources: Vec<(usize, bool)> = t.closed_sources.iter().map(|&i| (i, true)).collect();
        if let Some(index) = &values {
            let mut open: Vec<usize> = t.open_sources.clone();
            open.sort_by_key(|&i| match &t.literals[i].kind {
                TKind::Atom { predicate, .. } => index.len(*predicate),
                _ => 0,
            });
            sources.extend(open.into_iter().map(|i| (i, false)));
        }

        let mut bound = vec![false; t.variables.len()];
        if let Some(seed) = &seed {
            for (b, s) in bound.iter_mut().zip(seed) {
                *b = s.is_some();
            }
        }
        for &(i, _) in &sources {
            if let TKind::Atom { args, .. } = &t.literals[i].kind {
                for arg in args {
                    if let TTerm::Var(v) = arg {
                        bound[*v] = true;
                    }
                }
            }
        }
        let mut free = Vec::new();
        let mut domains = Vec::new();
        for (v, is_bound) in bound.iter().enumerate() {
            if !is_bound {
                match &t.types[v] {
                    Some(ty) => {
                        free.push(v);
                        domains.push(self.facts.type_domain(ty));
                    }
                    None => {
                        return Err(GroundingError::UnboundedVariable {
                            rule,
                            variable: t.variables[v].clone(),
                        })
                    }
                }
            }
        }

        let mut bindings = Vec::new();
        let start = seed.unwrap_or_else(|| vec![None; t.variables.len()]);
        self.join(t, &sources, values.as_ref(), 0, start, &free, &domains, &mut bindings);

        let interp = scope.interp();
        let zero_query = matches!(scope, Scope::Violated { zero_query: true, .. });
        let value = |a: &GroundAtom| if zero_query { 0.0 } else { interp.value(a).unwrap_or(0.0) };
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for binding in bindings {
            if !seen.insert(binding.clone()) {
                continue;
            }
            let Some(g) = self.instantiate(t, binding, interp)? else {
                continue;
            };
            let keep = match scope {
                Scope::All { .. } => g.max_distance() > 0.0,
                Scope::Violated { distance_threshold, .. } => g.distance(value) > distance_threshold,
            };
            if keep {
                out.push(g);
            }
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn join(
        &self,
        t: &Template,
        sources: &[(usize, bool)],
        values: Option<&ValueIndex>,
        step: usize,
        binding: Vec<Option<EntityId>>,
        free: &[usize],
        domains: &[Vec<EntityId>],
        out: &mut Vec<Vec<EntityId>>,
    ) {
        if !guards_hold(t, &binding) {
            return;
        }
        if step < sources.len() {
            let (literal, closed) = sources[step];
            let TKind::Atom { predicate, args } = &t.literals[literal].kind else {
                unreachable!("join sources are atoms")
            };
            let pattern: Vec<Option<EntityId>> = args
                .iter()
                .map(|a| match a {
                    TTerm::Const(c) => Some(*c),
                    TTerm::Var(v) => binding[*v],
                })
                .collect();
            let rows: Vec<Vec<EntityId>> = if closed {
                self.facts
                    .matching(*predicate, &pattern)
                    .filter(|(_, v)| *v > 0.0)
                    .map(|(a, _)| a.to_vec())
                    .collect()
            } else {
                match values.and_then(|idx| idx.relations.get(predicate)) {
                    Some(rel) => rel.matching(&pattern).map(|(a, _)| a.to_vec()).collect(),
                    None => Vec::new(),
                }
            };
            for row in rows {
                let mut next = binding.clone();
                if unify(args, &row, &mut next) {
                    self.join(t, sources, values, step + 1, next, free, domains, out);
                }
            }
            return;
        }
        let index = step - sources.len();
        if index < free.len() {
            let v = free[index];
            if binding[v].is_some() {
                self.join(t, sources, values, step + 1, binding, free, domains, out);
                return;
            }
            for entity in &domains[index] {
                let mut next = binding.clone();
                next[v] = Some(*entity);
                self.join(t, sources, values, step + 1, next, free, domains, out);
            }
            return;
        }
        if let Some(complete) = binding.into_iter().collect::<Option<Vec<_>>>() {
            out.push(complete);
        }
    }

    fn similarity(&self, function: &str, a: EntityId, b: EntityId) -> Result<f64, GroundingError> {
        let key = (function.to_string(), a, b);
        if let Some(v) = self.similarity_cache.borrow().get(&key) {
            return Ok(*v);
        }
        let v = self
            .similarity
            .evaluate(function, self.facts.entity_name(a), self.facts.entity_name(b))?
            .get();
        self.similarity_cache.borrow_mut().insert(key, v);
        Ok(v)
    }

    fn set_members(&self, set: &TSet, binding: &[EntityId]) -> Vec<EntityId> {
        let mut out = BTreeSet::new();
        for (anchor, path) in &set.branches {
            let key = (path.clone(), binding[*anchor]);
            if let Some(members) = self.set_cache.borrow().get(&key) {
                out.extend(members.iter().copied());
                continue;
            }
            let mut frontier: BTreeSet<EntityId> = BTreeSet::from([binding[*anchor]]);
            for relation in path {
                let mut next = BTreeSet::new();
                for entity in &frontier {
                    let pattern = [Some(*entity), None];
                    for (args, value) in self.facts.matching(*relation, &pattern) {
                        if value > 0.0 {
                            next.insert(args[1]);
                        }
                    }
                }
                frontier = next;
            }
            let members: Vec<EntityId> = frontier.into_iter().collect();
            out.extend(members.iter().copied());
            self.set_cache.borrow_mut().insert(key, members);
        }
        out.into_iter().collect()
    }

    /// Builds the ground rule for a complete binding; `None` when the clause
    /// is satisfied whatever the open atoms are.
    fn instantiate(
        &self,
        t: &Template,
        binding: Vec<EntityId>,
        interp: &Interpretation,
    ) -> Result<Option<GroundRule>, GroundingError> {
        let term = |x: &TTerm| match x {
            TTerm::Var(v) => binding[*v],
            TTerm::Const(c) => *c,
        };
        let known = |atom: &GroundAtom| -> Option<f64> {
            if self.facts.is_closed(atom.predicate) {
                Some(self.facts.value(atom).unwrap_or(0.0))
            } else if interp.is_evidence(atom) {
                interp.value(atom)
            } else {
                None
            }
        };
        let signed = |negated: bool, v: f64| if negated { 1.0 - v } else { v };

        let mut truth = 0.0;
        let mut literals = Vec::new();
        let mut sets = Vec::new();
        for literal in &t.literals {
            match &literal.kind {
                TKind::Atom { predicate, args } => {
                    let atom = GroundAtom::new(*predicate, args.iter().map(term).collect());
                    match known(&atom) {
                        Some(v) => truth += signed(literal.negated, v),
                        None => literals.push(SignedLiteral { atom, negated: literal.negated }),
                    }
                }
                TKind::Sim { function, left, right } => {
                    truth += signed(literal.negated, self.similarity(function, term(left), term(right))?);
                }
                TKind::Set { member, left, right } => {
                    let a = self.set_members(left, &binding);
                    let b = self.set_members(right, &binding);
                    let expr = build_set_sim_expression(&a, &b, self.normalizer, |i, j| {
                        let atom = GroundAtom::new(*member, vec![*i, *j]);
                        match known(&atom) {
                            Some(v) => MemberValue::Constant(v),
                            None => MemberValue::Variable(atom),
                        }
                    });
                    if expr.pairs.is_empty() {
                        truth += signed(literal.negated, expr.value(|_| 0.0));
                    } else {
                        sets.push(SignedSet { negated: literal.negated, expr });
                    }
                }
            }
            if truth >= 1.0 {
                return Ok(None);
            }
        }

        let mut constant = 1.0 - truth;
        let mut merged: Vec<(GroundAtom, f64)> = Vec::new();
        for literal in &literals {
            let coefficient = if literal.negated {
                constant -= 1.0;
                1.0
            } else {
                -1.0
            };
            match merged.iter_mut().find(|(a, _)| *a == literal.atom) {
                Some((_, c)) => *c += coefficient,
                None => merged.push((literal.atom.clone(), coefficient)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        let rule = GroundRule {
            rule: t.rule,
            weight: t.weight,
            binding,
            literals,
            sets,
            constant,
            terms: merged,
        };
        Ok((rule.max_distance() > 0.0).then_some(rule))
    }
}

fn unify(args: &[TTerm], row: &[EntityId], binding: &mut [Option<EntityId>]) -> bool {
    for (arg, value) in args.iter().zip(row) {
        match arg {
            TTerm::Const(c) => {
                if c != value {
                    return false;
                }
            }
            TTerm::Var(v) => match binding[*v] {
                Some(b) if b != *value => return false,
                Some(_) => {}
                None => binding[*v] = Some(*value),
            },
        }
    }
    true
}

fn guards_hold(t: &Template, binding: &[Option<EntityId>]) -> bool {
    let value = |x: &TTerm| match x {
        TTerm::Var(v) => binding[*v],
        TTerm::Const(c) => Some(*c),
    };
    t.guards.iter().all(|(l, r)| match (value(l), value(r)) {
        (Some(a), Some(b)) => a != b,
        _ => true,
    })
}

fn compile(
    program: &Program,
    facts: &FactSet,
    similarity: &SimilarityRegistry,
    index: usize,
) -> Result<Template, GroundingError> {
    let rule = &program.rules[index];
    let clause = normalize_to_clause(rule);
    let mut variables: Vec<String> = Vec::new();
    let mut var = |name: &str| -> usize {
        match variables.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                variables.push(name.to_string());
                variables.len() - 1
            }
        }
    };
    let mut types: HashMap<usize, String> = HashMap::new();

    let predicate = |name: &str| {
        facts.predicate_id(name).ok_or_else(|| GroundingError::UnknownPredicate {
            rule: index,
            predicate: name.to_string(),
        })
    };
    let term = |t: &Term, var: &mut dyn FnMut(&str) -> usize| -> Result<TTerm, GroundingError> {
        Ok(match t {
            Term::Variable(name) => TTerm::Var(var(name)),
            Term::Constant(name) => TTerm::Const(facts.entity(name).ok_or_else(|| {
                GroundingError::UnknownConstant { rule: index, constant: name.clone() }
            })?),
        })
    };
    let set = |expr: &SetExpression,
                   var: &mut dyn FnMut(&str) -> usize,
                   types: &mut HashMap<usize, String>|
     -> Result<TSet, GroundingError> {
        let mut branches = Vec::new();
        for branch in expr.branches() {
            let anchor = var(&branch.anchor);
            let path = branch.path.iter().map(|r| predicate(r)).collect::<Result<Vec<_>, _>>()?;
            if let Some(ty) = path.first().and_then(|p| facts.predicate(*p).arg_types[0].clone()) {
                types.entry(anchor).or_insert(ty);
            }
            branches.push((anchor, path));
        }
        Ok(TSet { branches })
    };

    let mut literals = Vec::new();
    for literal in &clause.literals {
        let kind = match &literal.kind {
            LiteralKind::Atom { predicate: name, args } => {
                let pid = predicate(name)?;
                let decl = facts.predicate(pid);
                let mut targs = Vec::new();
                for (position, arg) in args.iter().enumerate() {
                    let t = term(arg, &mut var)?;
                    if let (TTerm::Var(v), Some(ty)) = (t, &decl.arg_types[position]) {
                        types.entry(v).or_insert_with(|| ty.clone());
                    }
                    targs.push(t);
                }
                TKind::Atom { predicate: pid, args: targs }
            }
            LiteralKind::Similarity { function, left, right } => {
                if !similarity.contains(function) {
                    return Err(SimilarityError::Unknown(function.clone()).into());
                }
                TKind::Sim {
                    function: function.clone(),
                    left: term(left, &mut var)?,
                    right: term(right, &mut var)?,
                }
            }
            LiteralKind::SetSimilarity { member, left, right } => TKind::Set {
                member: predicate(member)?,
                left: set(left, &mut var, &mut types)?,
                right: set(right, &mut var, &mut types)?,
            },
            LiteralKind::Inequality { .. } => unreachable!("guards are split off"),
        };
        literals.push(TLiteral { negated: literal.negated, kind });
    }
    let mut guards = Vec::new();
    for guard in &clause.guards {
        if let LiteralKind::Inequality { left, right } = &guard.kind {
            guards.push((term(left, &mut var)?, term(right, &mut var)?));
        }
    }

    let mut closed_sources = Vec::new();
    let mut open_sources = Vec::new();
    for (i, literal) in literals.iter().enumerate() {
        if let (true, TKind::Atom { predicate, .. }) = (literal.negated, &literal.kind) {
            if facts.is_closed(*predicate) {
                closed_sources.push(i);
            } else {
                open_sources.push(i);
            }
        }
    }
    closed_sources.sort_by_key(|&i| match &literals[i].kind {
        TKind::Atom { predicate, .. } => facts.count(*predicate),
        _ => 0,
    });

    let types = (0..variables.len()).map(|v| types.get(&v).cloned()).collect();
    Ok(Template {
        rule: index,
        weight: rule.weight,
        variables,
        literals,
        guards,
        closed_sources,
        open_sources,
        types,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;
    use crate::truth::TruthValue;

    struct Fixture {
        program: Program,
        facts: FactSet,
        registry: SimilarityRegistry,
    }

    fn fixture(program: &str, facts: &str) -> Fixture {
        let program = parse_program(program).unwrap();
        let facts = FactSet::from_str(&program, facts).unwrap();
        Fixture { program, facts, registry: SimilarityRegistry::default() }
    }

    impl Fixture {
        fn ctx(&self) -> GroundingContext<'_> {
            GroundingContext::new(&self.program, &self.facts, &self.registry).unwrap()
        }
    }

    #[test]
    fn one_binding_one_grounding() {
        let f = fixture("closed link/2. open same/2.\n1 : link(A,B) => same(A,B) .", "link\td1\td2\n");
        let interp = Interpretation::from_facts(&f.facts);
        let g = f.ctx().ground_rule(0, &interp).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].literals.len(), 1);
        assert_eq!(g[0].constant, 1.0);
    }

    #[test]
    fn guard_filters_binding() {
        let f = fixture(
            "closed dom/1. open same/2.\n1 : dom(A) & dom(B) & A != B => same(A,B) .",
            "dom\td1\n",
        );
        let interp = Interpretation::from_facts(&f.facts);
        assert!(f.ctx().ground_rule(0, &interp).unwrap().is_empty());
    }

    #[test]
    fn evidence_satisfied_grounding_is_pruned() {
        let f = fixture("open b/1. open h/1. closed dom/1.\n1 : dom(X) & b(X) => h(X) .", "dom\tx\nb\tx\t0\n");
        let interp = Interpretation::from_facts(&f.facts);
        assert!(f.ctx().ground_rule(0, &interp).unwrap().is_empty());
    }

    #[test]
    fn unbounded_variable_is_an_error() {
        let f = fixture("open s/2.\nHARD : s(A,B) & s(B,C) => s(A,C) .", "");
        let interp = Interpretation::new();
        let err = f.ctx().ground_rule(0, &interp).unwrap_err();
        assert!(matches!(err, GroundingError::UnboundedVariable { .. }));
        // open body atoms at zero satisfy the rule, so nothing is violated
        assert!(f.ctx().violated(None, &interp, 0.0).unwrap().is_empty());
    }

    #[test]
    fn initial_activation() {
        let f = fixture(
            "closed simtext/2. open same/2.\n1 : simtext(A,B) => same(A,B) .\nHARD : same(A,B) & same(B,C) => same(A,C) .",
            "simtext\td1\td2\t0.8\nsimtext\td2\td3\t0\n",
        );
        let interp = Interpretation::from_facts(&f.facts);
        let active = f.ctx().initial_active_set(&interp).unwrap();
        assert_eq!(active.len(), 1);
        let value = active.rules()[0].distance(|_| 0.0);
        assert!((value - 0.8).abs() < 1e-12);
    }

    #[test]
    fn activation_of_transitivity() {
        let mut f = fixture("open same/2.\nHARD : same(A,B) & same(B,C) => same(A,C) .", "");
        let mut interp = Interpretation::new();
        let ab = f.facts.atom("same", &["d1", "d2"]).unwrap();
        let bc = f.facts.atom("same", &["d2", "d3"]).unwrap();
        let ac = f.facts.atom("same", &["d1", "d3"]).unwrap();
        interp.set_query(ab.clone(), TruthValue::new(0.8).unwrap()).unwrap();
        interp.set_query(bc, TruthValue::new(0.9).unwrap()).unwrap();
        let ctx = f.ctx();
        let rules = ctx.activate_for(&ab, &interp, 0.0).unwrap();
        let target: Vec<&GroundRule> = rules.iter().filter(|g| g.atoms().any(|a| *a == ac)).collect();
        assert_eq!(target.len(), 1);
        let d = target[0].distance(|a| interp.value(a).unwrap_or(0.0));
        assert!((d - 0.7).abs() < 1e-12);

        let mut active = ActiveSet::new();
        assert_eq!(active.extend(rules.clone()), rules.len());
        assert_eq!(active.extend(rules), 0);
    }

    #[test]
    fn set_similarity_grounding() {
        let f = fixture(
            "closed child/2. closed concept/1. open match/2.\n\
             1 : concept(A) & concept(B) & setsim[match]({A.child}, {B.child}) => match(A,B) .",
            "concept\ta\nconcept\tb\nchild\ta\ta1\nchild\ta\ta2\nchild\tb\tb1\n",
        );
        let interp = Interpretation::from_facts(&f.facts);
        let ctx = f.ctx();
        let g = ctx.ground_rule(0, &interp).unwrap();
        // (a,b) and (b,a) have member atoms; (a,a), (b,b) too
        assert_eq!(g.len(), 4);
        let ab = g
            .iter()
            .find(|g| g.binding == vec![f.facts.entity("a").unwrap(), f.facts.entity("b").unwrap()])
            .unwrap();
        assert_eq!(ab.sets.len(), 1);
        assert_eq!(ab.sets[0].expr.pairs.len(), 2);
        assert!((ab.sets[0].expr.pairs[0].1 - 1.0 / 3.0).abs() < 1e-12);

        let member = f.facts.find_atom("match", &["a1", "b1"]).unwrap();
        let mut interp = interp;
        interp.set_query(member.clone(), TruthValue::ONE).unwrap();
        let activated = ctx.activate_for(&member, &interp, 0.0).unwrap();
        assert_eq!(activated.len(), 1);
    }

    #[test]
    fn similarity_functions_become_constants() {
        let f = fixture(
            "closed name/2. open same/2.\n\
             1 : name(A, N) & name(B, M) & fn[levenshtein](N, M) & A != B => same(A,B) .",
            "name\tc1\tabc\nname\tc2\tabd\nname\tc3\txyz\n",
        );
        let interp = Interpretation::from_facts(&f.facts);
        let g = f.ctx().ground_rule(0, &interp).unwrap();
        // pairs with similarity 0 are satisfied by evidence
        assert_eq!(g.len(), 2);
        assert!((g[0].constant - 2.0 / 3.0).abs() < 1e-12);
    }
}
