//! Compilation of active ground rules into a linear or quadratic program.
//!
//! Every open atom becomes a variable in `[0, 1]`. A soft ground rule with
//! distance piece `p(x)` gets an auxiliary `r >= 0` with `p(x) <= r` and an
//! objective term in `r`; a hard one gets `p(x) <= 0`. A set similarity that
//! can exceed 1 is capped through an auxiliary `t` with `t <= 1` and
//! `t <= raw(x)`, which the optimizer pushes up to `min(1, raw(x))`.

use std::collections::HashMap;

use indexmap::IndexMap;

use crate::grounding::{ActiveSet, GroundRule};
use crate::program::{Program, RuleWeight};
use crate::store::{FactSet, GroundAtom, Interpretation};

use super::{DistanceMetric, InferenceConfig, L2Weighting};

/// What a constraint row encodes; used to report conflicts.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    /// `0 <= v <= 1` of an atom variable, or `r >= 0` of an auxiliary.
    Bound,
    /// Distance piece of the given active rule (index into the active set).
    Soft(usize),
    Hard(usize),
    /// `sum v <= 1` for one exclusivity group.
    Exclusivity { constraint: usize, atoms: Vec<GroundAtom> },
    SetCap(usize),
}

/// `sum(coefficient * x) <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
    pub origin: Origin,
}

/// Minimize `constant + c.x + sum(q_i * x_i^2)` subject to the constraints.
#[derive(Debug, Clone, Default)]
pub struct ConvexProgram {
    pub atoms: IndexMap<GroundAtom, usize>,
    pub variable_count: usize,
    /// Auxiliary variable of each soft active rule, by active-set index.
    pub aux: HashMap<usize, usize>,
    pub constraints: Vec<LinearConstraint>,
    pub linear: Vec<f64>,
    pub quadratic: Vec<f64>,
    pub constant: f64,
}

impl ConvexProgram {
    fn variable(&mut self) -> usize {
        self.variable_count += 1;
        self.linear.push(0.0);
        self.quadratic.push(0.0);
        self.variable_count - 1
    }

    fn bound_atom(&mut self, atom: &GroundAtom) -> usize {
        if let Some(&i) = self.atoms.get(atom) {
            return i;
        }
        let i = self.variable();
        self.atoms.insert(atom.clone(), i);
        self.constraints.push(LinearConstraint { terms: vec![(i, 1.0)], rhs: 1.0, origin: Origin::Bound });
        self.constraints.push(LinearConstraint { terms: vec![(i, -1.0)], rhs: 0.0, origin: Origin::Bound });
        i
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.linear
            .iter()
            .zip(&self.quadratic)
            .zip(x)
            .fold(self.constant, |acc, ((c, q), v)| acc + c * v + q * v * v)
    }

    /// Largest violation of any constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.terms.iter().map(|(i, a)| a * x[*i]).sum::<f64>() - c.rhs)
            .fold(0.0, f64::max)
    }

    pub fn is_quadratic(&self) -> bool {
        self.quadratic.iter().any(|q| *q != 0.0)
    }
}

/// Objective contribution of one soft ground rule at distance `d`.
pub fn penalty(weight: f64, d: f64, config: &InferenceConfig) -> f64 {
    match config.metric {
        DistanceMetric::L1 => weight * d,
        DistanceMetric::SquaredL2 => match config.l2_weighting {
            L2Weighting::InsideNorm => weight * weight * d * d,
            L2Weighting::PerTerm => weight * d * d,
        },
    }
}

fn objective_coefficient(weight: f64, config: &InferenceConfig) -> f64 {
    match (config.metric, config.l2_weighting) {
        (DistanceMetric::L1, _) => weight,
        (DistanceMetric::SquaredL2, L2Weighting::InsideNorm) => weight * weight,
        (DistanceMetric::SquaredL2, L2Weighting::PerTerm) => weight,
    }
}

pub fn build_convex_program(
    active: &ActiveSet,
    program: &Program,
    facts: &FactSet,
    interp: &Interpretation,
    weights: &[RuleWeight],
    config: &InferenceConfig,
) -> ConvexProgram {
    let mut cp = ConvexProgram::default();
    for atom in active.atoms() {
        cp.bound_atom(&atom);
    }
    for (index, rule) in active.rules().iter().enumerate() {
        let (terms, constant) = linearize(&mut cp, index, rule);
        match weights[rule.rule] {
            RuleWeight::Hard => cp.constraints.push(LinearConstraint {
                terms,
                rhs: -constant,
                origin: Origin::Hard(index),
            }),
            RuleWeight::Soft(w) => {
                if terms.is_empty() {
                    cp.constant += penalty(w, constant.max(0.0), config);
                    continue;
                }
                let r = cp.variable();
                cp.aux.insert(index, r);
                cp.constraints.push(LinearConstraint { terms: vec![(r, -1.0)], rhs: 0.0, origin: Origin::Bound });
                let mut terms = terms;
                terms.push((r, -1.0));
                cp.constraints.push(LinearConstraint { terms, rhs: -constant, origin: Origin::Soft(index) });
                let coefficient = objective_coefficient(w, config);
                match config.metric {
                    DistanceMetric::L1 => cp.linear[r] = coefficient,
                    DistanceMetric::SquaredL2 => cp.quadratic[r] = coefficient,
                }
            }
        }
    }
    add_exclusivity(&mut cp, program, facts, interp);
    cp
}

/// The distance piece of a rule as `(terms, constant)`, introducing cap
/// auxiliaries for set similarities that can exceed 1.
fn linearize(cp: &mut ConvexProgram, index: usize, rule: &GroundRule) -> (Vec<(usize, f64)>, f64) {
    let mut constant = rule.constant;
    let mut terms: Vec<(usize, f64)> = rule.terms.iter().map(|(a, c)| (cp.atoms[a], *c)).collect();
    for set in &rule.sets {
        let raw: Vec<(usize, f64)> = set.expr.pairs.iter().map(|(a, c)| (cp.atoms[a], *c)).collect();
        let capped = set.expr.clamp_to_unit && set.expr.raw_upper_bound() > 1.0;
        if set.negated {
            // 1 - raw; when raw can exceed 1 this overstates the distance of
            // the capped form, which is concave there
            constant += set.expr.constant - 1.0;
            terms.extend(raw);
        } else if capped {
            let t = cp.variable();
            cp.constraints.push(LinearConstraint { terms: vec![(t, 1.0)], rhs: 1.0, origin: Origin::SetCap(index) });
            let mut cap: Vec<(usize, f64)> = raw.iter().map(|(i, c)| (*i, -c)).collect();
            cap.push((t, 1.0));
            cp.constraints.push(LinearConstraint { terms: cap, rhs: set.expr.constant, origin: Origin::SetCap(index) });
            terms.push((t, -1.0));
        } else {
            constant -= set.expr.constant;
            terms.extend(raw.into_iter().map(|(i, c)| (i, -c)));
        }
    }
    (merge(terms), constant)
}

fn merge(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (i, c) in terms {
        match out.iter_mut().find(|(j, _)| *j == i) {
            Some((_, d)) => *d += c,
            None => out.push((i, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

fn add_exclusivity(cp: &mut ConvexProgram, program: &Program, facts: &FactSet, interp: &Interpretation) {
    for (ci, constraint) in program.exclusivity.iter().enumerate() {
        let Some(pid) = facts.predicate_id(&constraint.predicate) else {
            continue;
        };
        let key = |atom: &GroundAtom| -> Vec<_> {
            constraint.bound_positions().map(|p| atom.args[p]).collect()
        };
        let mut groups: IndexMap<Vec<_>, Vec<(usize, GroundAtom)>> = IndexMap::new();
        for (atom, &var) in &cp.atoms {
            if atom.predicate == pid {
                groups.entry(key(atom)).or_default().push((var, atom.clone()));
            }
        }
        if groups.is_empty() {
            continue;
        }
        let mut known: HashMap<Vec<_>, f64> = HashMap::new();
        for (atom, value) in interp.evidence() {
            if atom.predicate == pid {
                *known.entry(key(atom)).or_insert(0.0) += value;
            }
        }
        for (group, members) in groups {
            let rhs = 1.0 - known.get(&group).copied().unwrap_or(0.0);
            cp.constraints.push(LinearConstraint {
                terms: members.iter().map(|(v, _)| (*v, 1.0)).collect(),
                rhs,
                origin: Origin::Exclusivity {
                    constraint: ci,
                    atoms: members.into_iter().map(|(_, a)| a).collect(),
                },
            });
        }
    }
}
