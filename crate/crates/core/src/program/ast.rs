//! Syntax tree of a `.psl` program.

use std::fmt;

/// A term inside a literal. Variables start with an uppercase letter;
/// everything else is a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Variable(String),
    Constant(String),
}

impl Term {
    pub fn variable(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Constant(name.into())
    }

    pub fn as_variable(&self) -> Option<&str> {
        match self {
            Term::Variable(name) => Some(name),
            Term::Constant(_) => None,
        }
    }
}

/// A relation path such as `{A.linksTo.linksTo}`, optionally unioned with
/// further paths (`{A.linksTo} ++ {A.linksTo.linksTo}`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetExpression {
    pub anchor: String,
    pub path: Vec<String>,
    pub union_with: Option<Box<SetExpression>>,
}

impl SetExpression {
    pub fn new(anchor: impl Into<String>, path: Vec<String>) -> Self {
        SetExpression { anchor: anchor.into(), path, union_with: None }
    }

    pub fn union(mut self, other: SetExpression) -> Self {
        let mut tail = &mut self;
        while tail.union_with.is_some() {
            tail = tail.union_with.as_mut().unwrap();
        }
        tail.union_with = Some(Box::new(other));
        self
    }

    /// The union branches of this expression, in order.
    pub fn branches(&self) -> Vec<&SetExpression> {
        let mut out = vec![self];
        let mut next = self.union_with.as_deref();
        while let Some(branch) = next {
            out.push(branch);
            next = branch.union_with.as_deref();
        }
        out
    }

    pub fn relations(&self) -> Vec<&str> {
        self.branches()
            .into_iter()
            .flat_map(|b| b.path.iter().map(String::as_str))
            .collect()
    }

    pub fn anchors(&self) -> Vec<&str> {
        self.branches().into_iter().map(|b| b.anchor.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LiteralKind {
    /// `pred(t1, ..., tn)`
    Atom { predicate: String, args: Vec<Term> },
    /// `fn[name](t1, t2)`: an externally computed similarity.
    Similarity { function: String, left: Term, right: Term },
    /// `setsim[p](S1, S2)`: similarity of two relation-defined sets, where
    /// `p` gives the similarity of member pairs.
    SetSimilarity { member: String, left: SetExpression, right: SetExpression },
    /// `t1 != t2`, a grounding-time filter.
    Inequality { left: Term, right: Term },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub kind: LiteralKind,
}

impl Literal {
    pub fn atom(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Literal {
            negated: false,
            kind: LiteralKind::Atom { predicate: predicate.into(), args },
        }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn is_guard(&self) -> bool {
        matches!(self.kind, LiteralKind::Inequality { .. })
    }

    /// All variables mentioned by the literal, including set anchors.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match &self.kind {
            LiteralKind::Atom { args, .. } => {
                out.extend(args.iter().filter_map(Term::as_variable));
            }
            LiteralKind::Similarity { left, right, .. }
            | LiteralKind::Inequality { left, right } => {
                out.extend(left.as_variable());
                out.extend(right.as_variable());
            }
            LiteralKind::SetSimilarity { left, right, .. } => {
                out.extend(left.anchors());
                out.extend(right.anchors());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleWeight {
    Soft(f64),
    Hard,
}

impl RuleWeight {
    pub fn is_hard(&self) -> bool {
        matches!(self, RuleWeight::Hard)
    }

    pub fn soft(&self) -> Option<f64> {
        match self {
            RuleWeight::Soft(w) => Some(*w),
            RuleWeight::Hard => None,
        }
    }
}

/// `weight : body => head .` Body literals are conjoined, head literals
/// disjoined. A rule without `=>` has an empty body.
#[derive(Debug, Clone)]
pub struct Rule {
    pub body: Vec<Literal>,
    pub head: Vec<Literal>,
    pub weight: RuleWeight,
    pub source: String,
}

impl PartialEq for Rule {
    // source text is informational only
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body && self.head == other.head && self.weight == other.weight
    }
}

impl Rule {
    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.body.iter().chain(self.head.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    /// Entity type per argument; `None` for untyped positions.
    pub arg_types: Vec<Option<String>>,
    /// Closed predicates are fully observed evidence; open ones are inferred.
    pub closed: bool,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.arg_types.len()
    }
}

/// At most one atom `predicate(.., *, ..)` may be true for each assignment
/// of the bound positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusivityConstraint {
    pub predicate: String,
    pub arity: usize,
    pub free_position: usize,
}

impl ExclusivityConstraint {
    pub fn bound_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.arity).filter(move |&i| i != self.free_position)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub schema: Vec<PredicateDecl>,
    pub rules: Vec<Rule>,
    pub exclusivity: Vec<ExclusivityConstraint>,
}

impl Program {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.schema.iter().find(|decl| decl.name == name)
    }

    pub fn soft_rules(&self) -> impl Iterator<Item = (usize, &Rule)> {
        self.rules.iter().enumerate().filter(|(_, r)| !r.weight.is_hard())
    }

    pub fn hard_rules(&self) -> impl Iterator<Item = (usize, &Rule)> {
        self.rules.iter().enumerate().filter(|(_, r)| r.weight.is_hard())
    }

    /// Program indices of the soft rules, in order. Weight vectors are
    /// indexed by position in this list.
    pub fn soft_rule_indices(&self) -> Vec<usize> {
        self.soft_rules().map(|(i, _)| i).collect()
    }

    pub fn soft_weights(&self) -> Vec<f64> {
        self.rules.iter().filter_map(|r| r.weight.soft()).collect()
    }

    /// Replaces soft-rule weights in order.
    ///
    /// # Panics
    /// If `weights` does not have one entry per soft rule.
    pub fn with_soft_weights(&self, weights: &[f64]) -> Program {
        let mut program = self.clone();
        let mut it = weights.iter();
        for rule in program.rules.iter_mut() {
            if let RuleWeight::Soft(w) = &mut rule.weight {
                *w = *it.next().expect("one weight per soft rule");
            }
        }
        assert!(it.next().is_none(), "one weight per soft rule");
        program
    }
}

impl fmt::Display for RuleWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleWeight::Soft(w) => write!(f, "{w}"),
            RuleWeight::Hard => f.write_str("HARD"),
        }
    }
}
