//! In-memory fact store and interpretations.
//!
//! Facts are read from tab-separated lines `predicate<TAB>arg1<TAB>...[<TAB>value]`
//! with the value defaulting to 1. Entities are interned to [`EntityId`]s;
//! every predicate keeps one hash index per argument position.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use indexmap::IndexMap;
use thiserror::Error;

use crate::program::{PredicateDecl, Program, SetExpression, Term};
use crate::truth::{TruthError, TruthValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

/// Index of a predicate in the program schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredicateId(pub u32);

impl PredicateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: PredicateId,
    pub args: Vec<EntityId>,
}

impl GroundAtom {
    pub fn new(predicate: PredicateId, args: Vec<EntityId>) -> Self {
        GroundAtom { predicate, args }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{}unknown predicate `{name}`", at(.line))]
    UnknownPredicate { line: Option<usize>, name: String },
    #[error("{}`{predicate}` takes {expected} arguments, found {found}", at(.line))]
    ArityMismatch { line: Option<usize>, predicate: String, expected: usize, found: usize },
    #[error("{}value {value} is outside [0, 1]", at(.line))]
    OutOfRange { line: Option<usize>, value: f64 },
    #[error("open atom {0} has no value")]
    UnregisteredOpenAtom(String),
    #[error("atom {0} is evidence and cannot be a query atom")]
    EvidenceConflict(String),
    #[error("relation `{0}` is open and cannot be used in a set expression")]
    OpenRelationInSet(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at(line: &Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Relation {
    rows: Vec<(Vec<EntityId>, f64)>,
    row_of: HashMap<Vec<EntityId>, usize>,
    /// Per argument position: entity -> rows holding it there.
    index: Vec<HashMap<EntityId, Vec<usize>>>,
}

impl Relation {
    pub(crate) fn new(arity: usize) -> Self {
        Relation { index: vec![HashMap::new(); arity], ..Default::default() }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn matching<'a>(
        &'a self,
        pattern: &'a [Option<EntityId>],
    ) -> Box<dyn Iterator<Item = (&'a [EntityId], f64)> + 'a> {
        let matches = move |args: &[EntityId]| {
            pattern.iter().zip(args).all(|(p, a)| p.map_or(true, |p| p == *a))
        };
        let mut best: Option<&Vec<usize>> = None;
        for (position, bound) in pattern.iter().enumerate() {
            if let Some(entity) = bound {
                match self.index[position].get(entity) {
                    None => return Box::new(std::iter::empty()),
                    Some(rows) => {
                        if best.map_or(true, |b| rows.len() < b.len()) {
                            best = Some(rows);
                        }
                    }
                }
            }
        }
        match best {
            Some(rows) => Box::new(rows.iter().filter_map(move |&r| {
                let (args, v) = &self.rows[r];
                matches(args).then_some((args.as_slice(), *v))
            })),
            None => Box::new(self.rows.iter().map(|(args, v)| (args.as_slice(), *v))),
        }
    }

    pub(crate) fn insert(&mut self, args: Vec<EntityId>, value: f64) {
        if let Some(&row) = self.row_of.get(&args) {
            self.rows[row].1 = value;
            return;
        }
        let row = self.rows.len();
        for (position, entity) in args.iter().enumerate() {
            self.index[position].entry(*entity).or_default().push(row);
        }
        self.row_of.insert(args.clone(), row);
        self.rows.push((args, value));
    }

    fn remove(&mut self, args: &[EntityId]) -> bool {
        let Some(row) = self.row_of.remove(args) else {
            return false;
        };
        let mut rows = std::mem::take(&mut self.rows);
        rows.remove(row);
        *self = Relation::new(self.index.len());
        for (args, value) in rows {
            self.insert(args, value);
        }
        true
    }
}

/// Facts for every declared predicate, with per-position indexes.
///
/// Built once from a [`Program`] and fact files, then read concurrently.
#[derive(Debug, Clone)]
pub struct FactSet {
    schema: Vec<PredicateDecl>,
    predicate_ids: HashMap<String, PredicateId>,
    entities: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relations: Vec<Relation>,
}

impl FactSet {
    /// An empty store for the predicates of `program`. Constants mentioned in
    /// rules are interned up front.
    pub fn new(program: &Program) -> Self {
        let mut facts = FactSet {
            schema: program.schema.clone(),
            predicate_ids: program
                .schema
                .iter()
                .enumerate()
                .map(|(i, d)| (d.name.clone(), PredicateId(i as u32)))
                .collect(),
            entities: Vec::new(),
            entity_ids: HashMap::new(),
            relations: program.schema.iter().map(|d| Relation::new(d.arity())).collect(),
        };
        for rule in &program.rules {
            for literal in rule.literals() {
                use crate::program::LiteralKind::*;
                let terms: Vec<&Term> = match &literal.kind {
                    Atom { args, .. } => args.iter().collect(),
                    Similarity { left, right, .. } | Inequality { left, right } => vec![left, right],
                    SetSimilarity { .. } => Vec::new(),
                };
                for term in terms {
                    if let Term::Constant(name) = term {
                        facts.intern(name);
                    }
                }
            }
        }
        facts
    }

    pub fn intern(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(name.to_string());
        self.entity_ids.insert(name.to_string(), id);
        id
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.0 as usize]
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn predicate_id(&self, name: &str) -> Option<PredicateId> {
        self.predicate_ids.get(name).copied()
    }

    pub fn predicate(&self, id: PredicateId) -> &PredicateDecl {
        &self.schema[id.index()]
    }

    pub fn schema(&self) -> &[PredicateDecl] {
        &self.schema
    }

    pub fn is_closed(&self, id: PredicateId) -> bool {
        self.schema[id.index()].closed
    }

    /// Builds a ground atom from names, interning unseen constants.
    pub fn atom(&mut self, predicate: &str, args: &[&str]) -> Result<GroundAtom, StoreError> {
        let pid = self.lookup(predicate, args.len(), None)?;
        let args = args.iter().map(|a| self.intern(a)).collect();
        Ok(GroundAtom::new(pid, args))
    }

    /// Builds a ground atom from names without interning; `None` if some
    /// constant is unknown to the store.
    pub fn find_atom(&self, predicate: &str, args: &[&str]) -> Option<GroundAtom> {
        let pid = self.predicate_id(predicate)?;
        let args = args.iter().map(|a| self.entity(a)).collect::<Option<Vec<_>>>()?;
        Some(GroundAtom::new(pid, args))
    }

    fn lookup(&self, predicate: &str, arity: usize, line: Option<usize>) -> Result<PredicateId, StoreError> {
        let pid = self
            .predicate_id(predicate)
            .ok_or_else(|| StoreError::UnknownPredicate { line, name: predicate.to_string() })?;
        let expected = self.schema[pid.index()].arity();
        if expected != arity {
            return Err(StoreError::ArityMismatch {
                line,
                predicate: predicate.to_string(),
                expected,
                found: arity,
            });
        }
        Ok(pid)
    }

    /// Stores a fact, replacing any earlier value for the same atom.
    pub fn insert(&mut self, predicate: &str, args: &[&str], value: f64) -> Result<GroundAtom, StoreError> {
        let value = TruthValue::new(value)
            .map_err(|_| StoreError::OutOfRange { line: None, value })?
            .get();
        let atom = self.atom(predicate, args)?;
        self.relations[atom.predicate.index()].insert(atom.args.clone(), value);
        Ok(atom)
    }

    pub fn insert_atom(&mut self, atom: &GroundAtom, value: f64) -> Result<(), StoreError> {
        let value = TruthValue::new(value)
            .map_err(|_| StoreError::OutOfRange { line: None, value })?
            .get();
        self.relations[atom.predicate.index()].insert(atom.args.clone(), value);
        Ok(())
    }

    /// Removes a fact; returns whether it was present.
    pub fn remove(&mut self, atom: &GroundAtom) -> bool {
        self.relations[atom.predicate.index()].remove(&atom.args)
    }

    /// Loads tab-separated fact lines. Blank lines and `#` comments are skipped.
    pub fn load_str(&mut self, text: &str) -> Result<usize, StoreError> {
        self.load_reader(text.as_bytes())
    }

    pub fn load_reader<R: BufRead>(&mut self, reader: R) -> Result<usize, StoreError> {
        let mut count = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let number = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let name = fields[0];
            let pid = self
                .predicate_id(name)
                .ok_or_else(|| StoreError::UnknownPredicate { line: Some(number), name: name.to_string() })?;
            let arity = self.schema[pid.index()].arity();
            let rest = &fields[1..];
            let (args, value) = if rest.len() == arity {
                (rest, 1.0)
            } else if rest.len() == arity + 1 {
                let text = rest[arity];
                let value: f64 = text.trim().parse().map_err(|_| StoreError::Malformed {
                    line: number,
                    message: format!("`{text}` is not a number"),
                })?;
                (&rest[..arity], value)
            } else {
                return Err(StoreError::ArityMismatch {
                    line: Some(number),
                    predicate: name.to_string(),
                    expected: arity,
                    found: rest.len(),
                });
            };
            let value = TruthValue::new(value)
                .map_err(|_| StoreError::OutOfRange { line: Some(number), value })?
                .get();
            let args: Vec<EntityId> = args.iter().map(|a| self.intern(a)).collect();
            self.relations[pid.index()].insert(args, value);
            count += 1;
        }
        Ok(count)
    }

    pub fn from_str(program: &Program, text: &str) -> Result<Self, StoreError> {
        let mut facts = FactSet::new(program);
        facts.load_str(text)?;
        Ok(facts)
    }

    /// Canonical fact file: lines sorted, value omitted when it is 1.
    /// Writing a loaded canonical file reproduces it byte for byte.
    pub fn to_tsv(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        for (pid, relation) in self.relations.iter().enumerate() {
            let name = &self.schema[pid].name;
            for (args, value) in &relation.rows {
                let mut line = name.clone();
                for a in args {
                    line.push('\t');
                    line.push_str(self.entity_name(*a));
                }
                if *value != 1.0 {
                    line.push('\t');
                    line.push_str(&value.to_string());
                }
                lines.push(line);
            }
        }
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.relations.iter().map(|r| r.rows.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of facts stored for a predicate.
    pub fn count(&self, predicate: PredicateId) -> usize {
        self.relations[predicate.index()].rows.len()
    }

    /// Stored value of a fact, if present.
    pub fn value(&self, atom: &GroundAtom) -> Option<f64> {
        let relation = &self.relations[atom.predicate.index()];
        relation.row_of.get(&atom.args).map(|&row| relation.rows[row].1)
    }

    /// All facts of a predicate, in insertion order.
    pub fn facts(&self, predicate: PredicateId) -> impl Iterator<Item = (GroundAtom, f64)> + '_ {
        self.relations[predicate.index()]
            .rows
            .iter()
            .map(move |(args, v)| (GroundAtom::new(predicate, args.clone()), *v))
    }

    /// Rows matching a pattern of bound (`Some`) and wildcard (`None`)
    /// positions, as `(args, value)` pairs.
    pub fn matching<'a>(
        &'a self,
        predicate: PredicateId,
        pattern: &'a [Option<EntityId>],
    ) -> Box<dyn Iterator<Item = (&'a [EntityId], f64)> + 'a> {
        self.relations[predicate.index()].matching(pattern)
    }

    /// Facts unifying with `pattern`, where `None` is a wildcard.
    pub fn query(
        &self,
        predicate: &str,
        pattern: &[Option<&str>],
    ) -> Result<Vec<(GroundAtom, TruthValue)>, StoreError> {
        let pid = self.lookup(predicate, pattern.len(), None)?;
        let mut ids = Vec::with_capacity(pattern.len());
        for p in pattern {
            match p {
                None => ids.push(None),
                Some(name) => match self.entity(name) {
                    Some(id) => ids.push(Some(id)),
                    None => return Ok(Vec::new()),
                },
            }
        }
        Ok(self
            .matching(pid, &ids)
            .map(|(args, v)| (GroundAtom::new(pid, args.to_vec()), TruthValue::saturating(v)))
            .collect())
    }

    /// Entities reachable from `binding` along the relation path of `expr`,
    /// unioned over its branches. Facts with value 0 are not members.
    pub fn materialize_set(
        &self,
        expr: &SetExpression,
        binding: EntityId,
    ) -> Result<BTreeSet<EntityId>, StoreError> {
        let mut out = BTreeSet::new();
        for branch in expr.branches() {
            let mut frontier: BTreeSet<EntityId> = BTreeSet::from([binding]);
            for relation in &branch.path {
                let pid = self.lookup(relation, 2, None)?;
                if !self.is_closed(pid) {
                    return Err(StoreError::OpenRelationInSet(relation.clone()));
                }
                let mut next = BTreeSet::new();
                for entity in &frontier {
                    let pattern = [Some(*entity), None];
                    for (args, value) in self.matching(pid, &pattern) {
                        if value > 0.0 {
                            next.insert(args[1]);
                        }
                    }
                }
                frontier = next;
            }
            out.extend(frontier);
        }
        Ok(out)
    }

    /// Constants found in closed-predicate positions declared with `ty`.
    pub fn type_domain(&self, ty: &str) -> Vec<EntityId> {
        let mut out = BTreeSet::new();
        for (pid, decl) in self.schema.iter().enumerate() {
            if !decl.closed {
                continue;
            }
            for (position, t) in decl.arg_types.iter().enumerate() {
                if t.as_deref() == Some(ty) {
                    out.extend(self.relations[pid].rows.iter().map(|(args, _)| args[position]));
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn display_atom(&self, atom: &GroundAtom) -> AtomDisplay<'_> {
        AtomDisplay { facts: self, atom: atom.clone() }
    }

    /// Sort key that orders atoms by predicate name, then argument names.
    pub fn atom_key(&self, atom: &GroundAtom) -> (String, Vec<String>) {
        (
            self.schema[atom.predicate.index()].name.clone(),
            atom.args.iter().map(|a| self.entity_name(*a).to_string()).collect(),
        )
    }
}

pub struct AtomDisplay<'a> {
    facts: &'a FactSet,
    atom: GroundAtom,
}

impl fmt::Display for AtomDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.facts.predicate(self.atom.predicate).name)?;
        for (i, a) in self.atom.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(self.facts.entity_name(*a))?;
        }
        f.write_str(")")
    }
}

/// Truth values of ground atoms: fixed evidence and free query atoms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interpretation {
    evidence: IndexMap<GroundAtom, f64>,
    query: IndexMap<GroundAtom, f64>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Evidence made of the stored facts of open predicates. Closed facts are
    /// read from the store directly.
    pub fn from_facts(facts: &FactSet) -> Self {
        let mut interp = Interpretation::new();
        for (pid, decl) in facts.schema.iter().enumerate() {
            if decl.closed {
                continue;
            }
            for (atom, value) in facts.facts(PredicateId(pid as u32)) {
                interp.evidence.insert(atom, value);
            }
        }
        interp
    }

    pub fn set_evidence(&mut self, atom: GroundAtom, value: TruthValue) {
        self.query.shift_remove(&atom);
        self.evidence.insert(atom, value.get());
    }

    /// Sets a query value. Fails when the atom is already evidence.
    pub fn set_query(&mut self, atom: GroundAtom, value: TruthValue) -> Result<(), StoreError> {
        if self.evidence.contains_key(&atom) {
            return Err(StoreError::EvidenceConflict(format!("{atom:?}")));
        }
        self.query.insert(atom, value.get());
        Ok(())
    }

    pub fn evidence(&self) -> &IndexMap<GroundAtom, f64> {
        &self.evidence
    }

    pub fn query(&self) -> &IndexMap<GroundAtom, f64> {
        &self.query
    }

    pub fn is_evidence(&self, atom: &GroundAtom) -> bool {
        self.evidence.contains_key(atom)
    }

    /// Value from evidence or query, if registered.
    pub fn value(&self, atom: &GroundAtom) -> Option<f64> {
        self.evidence.get(atom).or_else(|| self.query.get(atom)).copied()
    }

    /// Truth of any atom: evidence, then query, then the closed-world store.
    /// Unregistered open atoms are an error.
    pub fn get_truth(&self, facts: &FactSet, atom: &GroundAtom) -> Result<TruthValue, StoreError> {
        if let Some(v) = self.value(atom) {
            return Ok(TruthValue::saturating(v));
        }
        if facts.is_closed(atom.predicate) {
            return Ok(TruthValue::saturating(facts.value(atom).unwrap_or(0.0)));
        }
        Err(StoreError::UnregisteredOpenAtom(facts.display_atom(atom).to_string()))
    }

    /// Query values as `predicate<TAB>args...<TAB>value` lines with six
    /// decimals, sorted by atom name.
    pub fn query_tsv(&self, facts: &FactSet) -> String {
        write_values(facts, self.query.iter())
    }

    /// Evidence and query values together, in the same format.
    pub fn full_tsv(&self, facts: &FactSet) -> String {
        write_values(facts, self.evidence.iter().chain(self.query.iter()))
    }
}

fn write_values<'a>(facts: &FactSet, values: impl Iterator<Item = (&'a GroundAtom, &'a f64)>) -> String {
    let mut rows: Vec<((String, Vec<String>), f64)> =
        values.map(|(atom, v)| (facts.atom_key(atom), *v)).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::new();
    for ((name, args), value) in rows {
        out.push_str(&name);
        for a in args {
            out.push('\t');
            out.push_str(&a);
        }
        out.push_str(&format!("\t{value:.6}\n"));
    }
    out
}

impl From<TruthError> for StoreError {
    fn from(err: TruthError) -> Self {
        match err {
            TruthError::OutOfRange(value) => StoreError::OutOfRange { line: None, value },
            other => StoreError::Malformed { line: 0, message: other.to_string() },
        }
    }
}
