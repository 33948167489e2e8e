//! Lukasiewicz truth algebra.
//!
//! Truth values live in `[0, 1]`. A ground rule is handled in clausal form,
//! as a disjunction of signed literals, and its distance from satisfaction is
//! one minus the Lukasiewicz truth of that disjunction.

use std::fmt;

use thiserror::Error;

/// Slack allowed when validating truth values coming back from the solver.
/// Values within this distance of `[0, 1]` are clamped instead of rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TruthError {
    #[error("truth value {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error("no truth value for atom {0}")]
    MissingValue(String),
    #[error("clause has no literals")]
    EmptyClause,
}

/// A real-valued truth degree in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct TruthValue(f64);

impl TruthValue {
    pub const ZERO: TruthValue = TruthValue(0.0);
    pub const ONE: TruthValue = TruthValue(1.0);

    pub fn new(value: f64) -> Result<Self, TruthError> {
        if !value.is_finite()
            || value < -DOMAIN_TOLERANCE
            || value > 1.0 + DOMAIN_TOLERANCE
        {
            return Err(TruthError::OutOfRange(value));
        }
        Ok(TruthValue(value.clamp(0.0, 1.0)))
    }

    /// Clamps any finite value into `[0, 1]`.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            TruthValue(0.0)
        } else {
            TruthValue(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<f64> for TruthValue {
    type Error = TruthError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        TruthValue::new(value)
    }
}

impl From<TruthValue> for f64 {
    fn from(value: TruthValue) -> Self {
        value.0
    }
}

/// A t-norm / t-conorm pair with its negation.
///
/// Only [`Lukasiewicz`] is used by the solver compilation, which relies on
/// the operators being piecewise linear.
pub trait TruthAlgebra {
    fn tnorm(a: TruthValue, b: TruthValue) -> TruthValue;
    fn tconorm(a: TruthValue, b: TruthValue) -> TruthValue;
    fn negate(a: TruthValue) -> TruthValue;

    fn tnorm_fold<I: IntoIterator<Item = TruthValue>>(values: I) -> TruthValue {
        values.into_iter().fold(TruthValue::ONE, Self::tnorm)
    }

    fn tconorm_fold<I: IntoIterator<Item = TruthValue>>(values: I) -> TruthValue {
        values.into_iter().fold(TruthValue::ZERO, Self::tconorm)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Lukasiewicz;

impl TruthAlgebra for Lukasiewicz {
    #[inline]
    fn tnorm(a: TruthValue, b: TruthValue) -> TruthValue {
        // exact identity element
        if b.0 == 1.0 {
            return a;
        }
        if a.0 == 1.0 {
            return b;
        }
        TruthValue((a.0 + b.0 - 1.0).max(0.0))
    }

    #[inline]
    fn tconorm(a: TruthValue, b: TruthValue) -> TruthValue {
        TruthValue((a.0 + b.0).min(1.0))
    }

    #[inline]
    fn negate(a: TruthValue) -> TruthValue {
        TruthValue(1.0 - a.0)
    }
}

/// Lukasiewicz conjunction `max(0, a + b - 1)` on raw values.
pub fn tnorm(a: f64, b: f64) -> Result<TruthValue, TruthError> {
    Ok(Lukasiewicz::tnorm(TruthValue::new(a)?, TruthValue::new(b)?))
}

/// Lukasiewicz disjunction `min(1, a + b)` on raw values.
pub fn tconorm(a: f64, b: f64) -> Result<TruthValue, TruthError> {
    Ok(Lukasiewicz::tconorm(TruthValue::new(a)?, TruthValue::new(b)?))
}

pub fn negate(a: f64) -> Result<TruthValue, TruthError> {
    Ok(Lukasiewicz::negate(TruthValue::new(a)?))
}

/// A literal of a clause: an atom reference together with its sign.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedLiteral<A> {
    pub atom: A,
    pub negated: bool,
}

impl<A> SignedLiteral<A> {
    pub fn positive(atom: A) -> Self {
        SignedLiteral { atom, negated: false }
    }

    pub fn negative(atom: A) -> Self {
        SignedLiteral { atom, negated: true }
    }

    /// Contribution of this literal to the clause truth, given the atom value.
    #[inline]
    pub fn contribution(&self, value: f64) -> f64 {
        if self.negated {
            1.0 - value
        } else {
            value
        }
    }
}

/// Lukasiewicz truth of a disjunction of signed literals.
///
/// `valuation` returns `None` for atoms that have no value, which is an
/// error.
pub fn clause_truth<A, F>(literals: &[SignedLiteral<A>], valuation: F) -> Result<TruthValue, TruthError>
where
    A: fmt::Debug,
    F: Fn(&A) -> Option<f64>,
{
    if literals.is_empty() {
        return Err(TruthError::EmptyClause);
    }
    let mut total = 0.0;
    for literal in literals {
        let value = valuation(&literal.atom)
            .ok_or_else(|| TruthError::MissingValue(format!("{:?}", literal.atom)))?;
        let value = TruthValue::new(value)?;
        total += literal.contribution(value.get());
    }
    Ok(TruthValue(total.min(1.0)))
}

/// Distance from satisfaction of a ground rule with the given clause truth.
#[inline]
pub fn distance_from_satisfaction(clause_truth: TruthValue) -> f64 {
    1.0 - clause_truth.get()
}

/// Distance of the implication `body => head`: the amount by which the
/// conjoined body exceeds the disjoined head.
pub fn implication_distance(body: &[TruthValue], head: &[TruthValue]) -> f64 {
    let body = Lukasiewicz::tnorm_fold(body.iter().copied());
    let head = Lukasiewicz::tconorm_fold(head.iter().copied());
    (body.get() - head.get()).max(0.0)
}

/// An affine expression `constant + sum(coefficient * value(atom))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm<A> {
    pub constant: f64,
    pub terms: Vec<(A, f64)>,
}

impl<A> LinearForm<A> {
    pub fn constant(constant: f64) -> Self {
        LinearForm { constant, terms: Vec::new() }
    }

    pub fn evaluate<F: Fn(&A) -> f64>(&self, value: F) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, (atom, coefficient)| acc + coefficient * value(atom))
    }
}

/// The linear piece of the distance of a clause: `1 - sum(contributions)`.
///
/// The distance itself is `max(0, form)`; the solver encodes the outer `max`
/// with an auxiliary variable.
pub fn clause_distance_form<A: Clone>(literals: &[SignedLiteral<A>]) -> LinearForm<A> {
    let mut form = LinearForm::constant(1.0);
    for literal in literals {
        if literal.negated {
            form.constant -= 1.0;
            form.terms.push((literal.atom.clone(), 1.0));
        } else {
            form.terms.push((literal.atom.clone(), -1.0));
        }
    }
    form
}
