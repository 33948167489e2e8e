//! The `.psl` rule language.
//!
//! A program starts with predicate declarations, followed by weighted rules,
//! hard rules and exclusivity constraints:
//!
//! ```text
//! closed link/2.
//! closed simtext(doc, doc).
//! open same/2.
//!
//! 1.0 : simtext(A, B) => same(A, B) .
//! 0.5 : link(A, B) & same(B, C) & A != C => same(A, C) .
//! HARD : same(A, B) & same(B, C) => same(A, C) .
//! EXCLUSIVE : same(A, *) .
//! ```
//!
//! Conjunction is `&`, disjunction `|`, negation `~`. A rule without `=>`
//! is a disjunction with an empty body. Attribute similarities are written
//! `fn[name](X, Y)` and set similarities `setsim[p]({A.r1.r2} ++ {A.r3}, {B.r})`.

mod ast;
mod lexer;
mod parser;
mod printer;

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use ast::*;

/// A syntax error with its position and the tokens that would have been
/// accepted there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            let list: Vec<String> = self.expected.iter().map(|e| format!("`{e}`")).collect();
            write!(f, " (expected {})", list.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    NonPositiveWeight,
    DuplicatePredicate,
    UndeclaredPredicate,
    ArityMismatch,
    OpenSetRelation,
    NonBinarySetRelation,
    EmptyRule,
    UnboundGuardVariable,
}

/// A violation of a program invariant, optionally tied to a rule index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub rule: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            Some(i) => write!(f, "rule {}: {}", i + 1, self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("syntax error at {0}")]
    Syntax(#[from] ParseError),
    #[error("invalid program:\n{}", render(.0))]
    Invalid(Vec<Diagnostic>),
}

fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

/// Parses and validates a program.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let program = parse_unchecked(text)?;
    let diagnostics = validate_program(&program);
    if diagnostics.is_empty() {
        Ok(program)
    } else {
        Err(ProgramError::Invalid(diagnostics))
    }
}

/// Parses without checking program invariants.
pub fn parse_unchecked(text: &str) -> Result<Program, ParseError> {
    parser::parse(text)
}

/// Every invariant violation of `program`; empty iff the program is valid.
pub fn validate_program(program: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for decl in &program.schema {
        if !seen.insert(decl.name.as_str()) {
            out.push(Diagnostic {
                kind: DiagnosticKind::DuplicatePredicate,
                rule: None,
                message: format!("predicate `{}` is declared more than once", decl.name),
            });
        }
    }
    let schema: HashMap<&str, &PredicateDecl> =
        program.schema.iter().map(|d| (d.name.as_str(), d)).collect();

    let check_predicate = |out: &mut Vec<Diagnostic>, rule: Option<usize>, name: &str, arity: usize| {
        match schema.get(name) {
            None => out.push(Diagnostic {
                kind: DiagnosticKind::UndeclaredPredicate,
                rule,
                message: format!("predicate `{name}` is not declared"),
            }),
            Some(decl) if decl.arity() != arity => out.push(Diagnostic {
                kind: DiagnosticKind::ArityMismatch,
                rule,
                message: format!(
                    "predicate `{name}` has arity {} but is used with {arity} arguments",
                    decl.arity()
                ),
            }),
            Some(_) => {}
        }
    };

    for (index, rule) in program.rules.iter().enumerate() {
        let at = Some(index);
        if let RuleWeight::Soft(w) = rule.weight {
            if !(w > 0.0 && w.is_finite()) {
                out.push(Diagnostic {
                    kind: DiagnosticKind::NonPositiveWeight,
                    rule: at,
                    message: format!("weights must be positive, found {w}"),
                });
            }
        }
        if rule.literals().all(Literal::is_guard) {
            out.push(Diagnostic {
                kind: DiagnosticKind::EmptyRule,
                rule: at,
                message: "rule has no literals besides inequality guards".into(),
            });
        }
        let mut bound = HashSet::new();
        for literal in rule.literals().filter(|l| !l.is_guard()) {
            bound.extend(literal.variables());
        }
        for literal in rule.literals() {
            match &literal.kind {
                LiteralKind::Atom { predicate, args } => {
                    check_predicate(&mut out, at, predicate, args.len());
                }
                LiteralKind::SetSimilarity { member, left, right } => {
                    check_predicate(&mut out, at, member, 2);
                    for relation in left.relations().into_iter().chain(right.relations()) {
                        match schema.get(relation) {
                            None => out.push(Diagnostic {
                                kind: DiagnosticKind::UndeclaredPredicate,
                                rule: at,
                                message: format!("relation `{relation}` is not declared"),
                            }),
                            Some(decl) if !decl.closed => out.push(Diagnostic {
                                kind: DiagnosticKind::OpenSetRelation,
                                rule: at,
                                message: format!(
                                    "set expressions must use closed relations, `{relation}` is open"
                                ),
                            }),
                            Some(decl) if decl.arity() != 2 => out.push(Diagnostic {
                                kind: DiagnosticKind::NonBinarySetRelation,
                                rule: at,
                                message: format!("set path relation `{relation}` must be binary"),
                            }),
                            Some(_) => {}
                        }
                    }
                }
                LiteralKind::Inequality { left, right } => {
                    for v in [left, right].into_iter().filter_map(Term::as_variable) {
                        if !bound.contains(v) {
                            out.push(Diagnostic {
                                kind: DiagnosticKind::UnboundGuardVariable,
                                rule: at,
                                message: format!("variable `{v}` appears only in a guard"),
                            });
                        }
                    }
                }
                LiteralKind::Similarity { .. } => {}
            }
        }
    }

    for constraint in &program.exclusivity {
        check_predicate(&mut out, None, &constraint.predicate, constraint.arity);
    }
    out
}

/// A rule in clausal form: a disjunction of signed literals plus the
/// inequality guards that filter its groundings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClausalRule {
    pub literals: Vec<Literal>,
    pub guards: Vec<Literal>,
    pub weight: RuleWeight,
}

/// Rewrites `b1 & ... & bm => h1 | ... | hn` as `~b1 | ... | ~bm | h1 | ... | hn`.
pub fn normalize_to_clause(rule: &Rule) -> ClausalRule {
    let mut literals = Vec::new();
    let mut guards = Vec::new();
    for literal in &rule.body {
        if literal.is_guard() {
            guards.push(literal.clone());
        } else {
            literals.push(literal.clone().negate());
        }
    }
    for literal in &rule.head {
        if literal.is_guard() {
            guards.push(literal.clone());
        } else {
            literals.push(literal.clone());
        }
    }
    ClausalRule { literals, guards, weight: rule.weight }
}
