//! Exhaustive grid search for the MAP state of tiny programs.
//!
//! Every query atom ranges over `{0, step, ..., 1}`. Atoms are assigned in a
//! fixed order and each ground rule or exclusivity group is scored as soon
//! as its last atom is fixed, so infeasible or dominated prefixes are cut
//! without changing the result: penalties are nonnegative and the first
//! minimizer in enumeration order is kept.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use psl_core::inference::{objective_value, penalty, rule_weights};
use psl_core::program::RuleWeight;
use psl_core::{GroundAtom, GroundRule, GroundingContext, GroundingError, InferenceConfig, Interpretation, TruthValue};

pub const MAX_QUERY_ATOMS: usize = 8;

#[derive(Debug)]
pub enum OracleError {
    TooManyAtoms(usize),
    BadStep(f64),
    Grounding(GroundingError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooManyAtoms(n) => {
                write!(f, "{n} query atoms; grid search is limited to {MAX_QUERY_ATOMS}")
            }
            OracleError::BadStep(s) => write!(f, "grid step {s} does not divide 1"),
            OracleError::Grounding(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for OracleError {}

impl From<GroundingError> for OracleError {
    fn from(e: GroundingError) -> Self {
        OracleError::Grounding(e)
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Evidence plus the best grid assignment; `None` if no grid point is
    /// feasible.
    pub interpretation: Option<Interpretation>,
    pub objective: f64,
    pub query_atoms: Vec<GroundAtom>,
}

struct Group {
    atoms: Vec<usize>,
    known: f64,
}

struct Search<'r> {
    values: Vec<f64>,
    grid: Vec<f64>,
    /// Ground rules that become fully assigned at each level.
    rules_at: Vec<Vec<(&'r GroundRule, RuleWeight)>>,
    groups_at: Vec<Vec<Group>>,
    index: HashMap<GroundAtom, usize>,
    evidence: &'r Interpretation,
    config: &'r InferenceConfig,
    best: f64,
    best_values: Option<Vec<f64>>,
}

impl Search<'_> {
    fn value(&self, atom: &GroundAtom) -> f64 {
        match self.index.get(atom) {
            Some(&i) => self.values[i],
            None => self.evidence.value(atom).unwrap_or(0.0),
        }
    }

    /// Cost added by the rules closing at `level`, or `None` if a hard
    /// constraint is violated.
    fn level_cost(&self, level: usize) -> Option<f64> {
        let tolerance = self.config.feasibility_tolerance;
        let mut cost = 0.0;
        for (rule, weight) in &self.rules_at[level] {
            let d = rule.distance(|a| self.value(a));
            match weight {
                RuleWeight::Hard if d > tolerance => return None,
                RuleWeight::Hard => {}
                RuleWeight::Soft(w) => cost += penalty(*w, d, self.config),
            }
        }
        for group in &self.groups_at[level] {
            let total: f64 = group.known + group.atoms.iter().map(|&i| self.values[i]).sum::<f64>();
            if total - 1.0 > tolerance {
                return None;
            }
        }
        Some(cost)
    }

    fn descend(&mut self, level: usize, partial: f64) {
        if level == self.values.len() {
            if partial < self.best {
                self.best = partial;
                self.best_values = Some(self.values.clone());
            }
            return;
        }
        for k in 0..self.grid.len() {
            self.values[level] = self.grid[k];
            if let Some(cost) = self.level_cost(level + 1) {
                let total = partial + cost;
                if total < self.best {
                    self.descend(level + 1, total);
                }
            }
        }
        self.values[level] = 0.0;
    }
}

/// Grid values `{0, step, ..., 1}`.
pub fn grid_points(step: f64) -> Result<Vec<f64>, OracleError> {
    let n = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (n * step - 1.0).abs() > 1e-9 {
        return Err(OracleError::BadStep(step));
    }
    let n = n as usize;
    Ok((0..=n).map(|k| k as f64 / n as f64).collect())
}

/// The grid point of least objective over all groundings of the program.
/// Refuses programs with more than [`MAX_QUERY_ATOMS`] query atoms.
pub fn brute_force_map(
    ctx: &GroundingContext<'_>,
    evidence: &Interpretation,
    grid_step: f64,
    config: &InferenceConfig,
) -> Result<OracleResult, OracleError> {
    let grid = grid_points(grid_step)?;
    let rules = ctx.ground_all(evidence)?;
    let facts = ctx.facts();
    let mut atoms: BTreeSet<GroundAtom> = evidence.query().keys().cloned().collect();
    for rule in &rules {
        atoms.extend(rule.atoms().filter(|a| !evidence.is_evidence(a) && !facts.is_closed(a.predicate)).cloned());
    }
    let atoms: Vec<GroundAtom> = atoms.into_iter().collect();
    if atoms.len() > MAX_QUERY_ATOMS {
        return Err(OracleError::TooManyAtoms(atoms.len()));
    }
    let index: HashMap<GroundAtom, usize> = atoms.iter().cloned().zip(0..).collect();
    let weights = rule_weights(ctx);

    // level k closes once atoms 0..k are assigned; level 0 holds constants
    let mut rules_at: Vec<Vec<(&GroundRule, RuleWeight)>> = (0..=atoms.len()).map(|_| Vec::new()).collect();
    for rule in &rules {
        let level = rule.atoms().filter_map(|a| index.get(a)).map(|i| i + 1).max().unwrap_or(0);
        rules_at[level].push((rule, weights[rule.rule]));
    }
    let mut groups_at: Vec<Vec<Group>> = (0..=atoms.len()).map(|_| Vec::new()).collect();
    for constraint in &ctx.program().exclusivity {
        let Some(pid) = facts.predicate_id(&constraint.predicate) else {
            continue;
        };
        let key = |a: &GroundAtom| -> Vec<_> { constraint.bound_positions().map(|p| a.args[p]).collect() };
        let mut groups: HashMap<Vec<_>, Group> = HashMap::new();
        for (atom, v) in evidence.evidence() {
            if atom.predicate == pid {
                groups.entry(key(atom)).or_insert(Group { atoms: Vec::new(), known: 0.0 }).known += v;
            }
        }
        for (i, atom) in atoms.iter().enumerate() {
            if atom.predicate == pid {
                groups.entry(key(atom)).or_insert(Group { atoms: Vec::new(), known: 0.0 }).atoms.push(i);
            }
        }
        for group in groups.into_values() {
            let level = group.atoms.iter().map(|i| i + 1).max().unwrap_or(0);
            groups_at[level].push(group);
        }
    }

    let mut search = Search {
        values: vec![0.0; atoms.len()],
        grid,
        rules_at,
        groups_at,
        index,
        evidence,
        config,
        best: f64::INFINITY,
        best_values: None,
    };
    if let Some(base) = search.level_cost(0) {
        search.descend(0, base);
    }
    let interpretation = search.best_values.map(|values| {
        let mut interp = evidence.clone();
        for (atom, v) in atoms.iter().zip(values) {
            interp.set_query(atom.clone(), TruthValue::saturating(v)).expect("query atoms are not evidence");
        }
        interp
    });
    let objective = match &interpretation {
        Some(interp) => objective_value(ctx, interp, config)?,
        None => f64::INFINITY,
    };
    Ok(OracleResult { interpretation, objective, query_atoms: atoms })
}
