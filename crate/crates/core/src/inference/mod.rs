//! MAP inference: lazy activation of ground rules around a convex solve.
//!
//! Query atoms start at 0 and only ground rules with positive distance are
//! active. After each solve, rules containing atoms whose value rose above
//! the activation threshold are checked and added when violated; the loop
//! stops once no rule is added. A final sweep over all groundings confirms
//! that nothing outside the active set is violated.

pub mod compile;
pub mod solver;

use std::fmt;

use thiserror::Error;

use crate::grounding::{ActiveSet, GroundRule, GroundingContext, GroundingError};
use crate::program::RuleWeight;
use crate::store::{FactSet, GroundAtom, Interpretation};
use crate::truth::TruthValue;

pub use compile::{build_convex_program, penalty, ConvexProgram, LinearConstraint, Origin};
pub use solver::{solve, SolveResult, SolveStatus, SolverFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    #[default]
    L1,
    SquaredL2,
}

/// How rule weights enter the squared-L2 objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum L2Weighting {
    /// `||(w_k * d)||^2`, so each term is `w_k^2 * d^2`.
    #[default]
    InsideNorm,
    /// `sum w_k * d^2`.
    PerTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub metric: DistanceMetric,
    pub l2_weighting: L2Weighting,
    /// Atoms above this value trigger activation of their rules.
    pub activation_threshold: f64,
    pub solver_tolerance: f64,
    /// Slack allowed on hard and exclusivity constraints when checking.
    pub feasibility_tolerance: f64,
    pub max_outer_iterations: usize,
    pub solver_max_iterations: u32,
    /// Sweep all groundings for violations before declaring convergence.
    pub completion_sweep: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            metric: DistanceMetric::L1,
            l2_weighting: L2Weighting::InsideNorm,
            activation_threshold: 0.01,
            solver_tolerance: 1e-6,
            feasibility_tolerance: 1e-6,
            max_outer_iterations: 100,
            solver_max_iterations: 200,
            completion_sweep: true,
        }
    }
}

impl InferenceConfig {
    pub fn squared_l2() -> Self {
        InferenceConfig { metric: DistanceMetric::SquaredL2, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.activation_threshold > 0.0 && self.activation_threshold < 1.0) {
            return Err(InferenceError::Config("activation threshold must lie in (0, 1)".into()));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(InferenceError::Config("solver tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Grounding(#[from] GroundingError),
    #[error("hard constraints are infeasible; conflicting constraints:\n{}", .conflict.join("\n"))]
    Infeasible { conflict: Vec<String> },
    #[error("{0}")]
    Solver(SolverFailure),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// One line of the run report.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub active_rules: usize,
    pub atoms: usize,
    pub objective: f64,
    pub solver_iterations: u32,
    pub added: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub iterations: Vec<IterationReport>,
    pub converged: bool,
    pub nontrivial_face: bool,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for it in &self.iterations {
            writeln!(
                f,
                "iteration {}\tactive {}\tatoms {}\tobjective {:.6}\tsolver-iterations {}\tadded {}",
                it.iteration, it.active_rules, it.atoms, it.objective, it.solver_iterations, it.added
            )?;
        }
        writeln!(f, "converged {}", self.converged)?;
        if self.nontrivial_face {
            writeln!(f, "note: the optimum is not unique; other assignments reach the same objective")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MapResult {
    /// Evidence plus the inferred query values.
    pub interpretation: Interpretation,
    /// Objective of the active program at the returned assignment.
    pub objective: f64,
    pub status: SolveStatus,
    pub active: ActiveSet,
    pub report: RunReport,
}

impl MapResult {
    pub fn iterations(&self) -> usize {
        self.report.iterations.len()
    }
}

/// Weight of every program rule, in program order.
pub fn rule_weights(ctx: &GroundingContext<'_>) -> Vec<RuleWeight> {
    ctx.program().rules.iter().map(|r| r.weight).collect()
}

/// MAP inference with the program's own weights.
pub fn map_inference(
    ctx: &GroundingContext<'_>,
    evidence: &Interpretation,
    config: &InferenceConfig,
) -> Result<MapResult, InferenceError> {
    map_inference_weighted(ctx, evidence, config, &rule_weights(ctx))
}

/// MAP inference with `weights` (one per program rule) in place of the
/// program's weights.
pub fn map_inference_weighted(
    ctx: &GroundingContext<'_>,
    evidence: &Interpretation,
    config: &InferenceConfig,
    weights: &[RuleWeight],
) -> Result<MapResult, InferenceError> {
    config.validate()?;
    let mut interp = evidence.clone();
    // every query atom starts from the all-zeros assignment
    let registered: Vec<GroundAtom> = interp.query().keys().cloned().collect();
    for atom in registered {
        interp.set_query(atom, TruthValue::ZERO).expect("query atoms are not evidence");
    }
    let mut active = ctx.initial_active_set(&interp)?;
    let mut report = RunReport::default();
    if active.atoms().is_empty() {
        let cp = build_convex_program(&active, ctx.program(), ctx.facts(), &interp, weights, config);
        let result = solve(&cp, config).map_err(InferenceError::Solver)?;
        if result.status == SolveStatus::Infeasible {
            return Err(infeasible(&cp, &result, &active, ctx.facts()));
        }
        report.converged = true;
        return Ok(MapResult { interpretation: interp, objective: result.objective, status: result.status, active, report });
    }

    let mut objective = 0.0;
    let mut status = SolveStatus::Optimal;
    for iteration in 1..=config.max_outer_iterations {
        let cp = build_convex_program(&active, ctx.program(), ctx.facts(), &interp, weights, config);
        let result = solve(&cp, config).map_err(InferenceError::Solver)?;
        if result.status == SolveStatus::Infeasible {
            return Err(infeasible(&cp, &result, &active, ctx.facts()));
        }
        status = result.status;
        objective = result.objective;
        for (atom, &var) in &cp.atoms {
            interp.set_query(atom.clone(), TruthValue::saturating(result.assignment[var])).expect("open atoms only");
        }
        report.nontrivial_face = config.metric == DistanceMetric::L1 && has_free_direction(&cp, &result.assignment);

        let mut added = 0;
        let raised: Vec<GroundAtom> = interp
            .query()
            .iter()
            .filter(|(_, v)| **v > config.activation_threshold)
            .map(|(a, _)| a.clone())
            .collect();
        for atom in &raised {
            added += active.extend(ctx.activate_for(atom, &interp, config.solver_tolerance)?);
        }
        if added == 0 && config.completion_sweep {
            added += active.extend(ctx.violated(None, &interp, config.solver_tolerance)?);
        }
        report.iterations.push(IterationReport {
            iteration,
            active_rules: active.len(),
            atoms: cp.atoms.len(),
            objective,
            solver_iterations: result.iterations,
            added,
        });
        log::debug!("iteration {iteration}: {} active rules, objective {objective}", active.len());
        if added == 0 {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("stopped after {} outer iterations without convergence", config.max_outer_iterations);
    }
    Ok(MapResult { interpretation: interp, objective, status, active, report })
}

fn infeasible(cp: &ConvexProgram, result: &SolveResult, active: &ActiveSet, facts: &FactSet) -> InferenceError {
    let describe = |i: &usize| match &cp.constraints[*i].origin {
        Origin::Hard(r) | Origin::Soft(r) => describe_rule(&active.rules()[*r], facts),
        Origin::Exclusivity { atoms, .. } => {
            let names: Vec<String> = atoms.iter().map(|a| facts.display_atom(a).to_string()).collect();
            format!("at most one of {}", names.join(", "))
        }
        Origin::Bound | Origin::SetCap(_) => "variable bound".to_string(),
    };
    InferenceError::Infeasible { conflict: result.conflict.iter().map(describe).collect() }
}

/// Human-readable form of a ground rule's open literals.
pub fn describe_rule(rule: &GroundRule, facts: &FactSet) -> String {
    let literals: Vec<String> = rule
        .literals
        .iter()
        .map(|l| format!("{}{}", if l.negated { "~" } else { "" }, facts.display_atom(&l.atom)))
        .collect();
    format!("rule {} grounding {{{}}} (constant {:.6})", rule.rule + 1, literals.join(" | "), rule.constant)
}

/// True when some atom variable touches only slack constraints, so it can
/// move without changing the objective.
fn has_free_direction(cp: &ConvexProgram, x: &[f64]) -> bool {
    let slack_tol = 1e-6;
    let mut tight = vec![false; cp.variable_count];
    for c in &cp.constraints {
        if matches!(c.origin, Origin::Bound) {
            continue;
        }
        let lhs: f64 = c.terms.iter().map(|(i, a)| a * x[*i]).sum();
        if c.rhs - lhs <= slack_tol {
            for (i, _) in &c.terms {
                tight[*i] = true;
            }
        }
    }
    cp.atoms.values().any(|&i| !tight[i])
}

/// Value function for objective evaluation: registered values, 0 otherwise.
fn valuation(interp: &Interpretation) -> impl Fn(&GroundAtom) -> f64 + '_ {
    move |a| interp.value(a).unwrap_or(0.0)
}

/// Unweighted sum of distances of all groundings of each rule.
pub fn rule_distance_norms(ctx: &GroundingContext<'_>, interp: &Interpretation) -> Result<Vec<f64>, GroundingError> {
    let mut norms = vec![0.0; ctx.program().rules.len()];
    let value = valuation(interp);
    for g in ctx.violated(None, interp, 0.0)? {
        norms[g.rule] += g.distance(&value);
    }
    Ok(norms)
}

/// Largest violation of a hard rule or exclusivity constraint.
pub fn hard_violation(ctx: &GroundingContext<'_>, interp: &Interpretation) -> Result<f64, GroundingError> {
    hard_violation_weighted(ctx, interp, &rule_weights(ctx))
}

fn hard_violation_weighted(
    ctx: &GroundingContext<'_>,
    interp: &Interpretation,
    weights: &[RuleWeight],
) -> Result<f64, GroundingError> {
    let value = valuation(interp);
    let mut worst: f64 = 0.0;
    for (r, w) in weights.iter().enumerate() {
        if w.is_hard() {
            for g in ctx.violated(Some(r), interp, 0.0)? {
                worst = worst.max(g.distance(&value));
            }
        }
    }
    let facts = ctx.facts();
    for constraint in &ctx.program().exclusivity {
        let Some(pid) = facts.predicate_id(&constraint.predicate) else {
            continue;
        };
        let mut sums: std::collections::HashMap<Vec<_>, f64> = Default::default();
        for (atom, v) in interp.evidence().iter().chain(interp.query()) {
            if atom.predicate == pid {
                let key: Vec<_> = constraint.bound_positions().map(|p| atom.args[p]).collect();
                *sums.entry(key).or_insert(0.0) += v;
            }
        }
        for total in sums.values() {
            worst = worst.max(total - 1.0);
        }
    }
    Ok(worst)
}

/// Weighted distance of `interp` over all groundings; infinite when a hard
/// rule or exclusivity constraint is violated beyond the feasibility
/// tolerance. Unregistered open atoms count as 0.
pub fn objective_value(
    ctx: &GroundingContext<'_>,
    interp: &Interpretation,
    config: &InferenceConfig,
) -> Result<f64, GroundingError> {
    objective_value_weighted(ctx, interp, config, &rule_weights(ctx))
}

pub fn objective_value_weighted(
    ctx: &GroundingContext<'_>,
    interp: &Interpretation,
    config: &InferenceConfig,
    weights: &[RuleWeight],
) -> Result<f64, GroundingError> {
    if hard_violation_weighted(ctx, interp, weights)? > config.feasibility_tolerance {
        return Ok(f64::INFINITY);
    }
    let value = valuation(interp);
    let mut total = 0.0;
    for (r, w) in weights.iter().enumerate() {
        if let RuleWeight::Soft(w) = w {
            for g in ctx.violated(Some(r), interp, 0.0)? {
                total += penalty(*w, g.distance(&value), config);
            }
        }
    }
    Ok(total)
}

/// Log of the unnormalized density: the negated objective.
pub fn log_unnormalized_density(
    ctx: &GroundingContext<'_>,
    interp: &Interpretation,
    config: &InferenceConfig,
) -> Result<f64, GroundingError> {
    Ok(-objective_value(ctx, interp, config)?)
}

/// Solves the fully grounded program in one shot, without activation.
pub fn eager_inference(
    ctx: &GroundingContext<'_>,
    evidence: &Interpretation,
    config: &InferenceConfig,
) -> Result<MapResult, InferenceError> {
    let weights = rule_weights(ctx);
    let mut interp = evidence.clone();
    let mut active = ActiveSet::new();
    active.extend(ctx.ground_all(evidence)?);
    let cp = build_convex_program(&active, ctx.program(), ctx.facts(), &interp, &weights, config);
    let result = solve(&cp, config).map_err(InferenceError::Solver)?;
    if result.status == SolveStatus::Infeasible {
        return Err(infeasible(&cp, &result, &active, ctx.facts()));
    }
    for (atom, &var) in &cp.atoms {
        interp.set_query(atom.clone(), TruthValue::saturating(result.assignment[var])).expect("open atoms only");
    }
    let report = RunReport { converged: true, ..Default::default() };
    Ok(MapResult { interpretation: interp, objective: result.objective, status: result.status, active, report })
}
