//! Interior-point solve of a compiled program, backed by Clarabel.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::compile::{ConvexProgram, Origin};
use super::InferenceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Values of all variables, atom values clamped to `[0, 1]`.
    pub assignment: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: u32,
    /// For infeasible programs: indices of a conflicting constraint subset.
    pub conflict: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverFailure(pub String);

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver failed: {}", self.0)
    }
}

struct Raw {
    x: Vec<f64>,
    status: SolverStatus,
    iterations: u32,
}

fn run(cp: &ConvexProgram, rows: &[usize], with_objective: bool, config: &InferenceConfig) -> Result<Raw, SolverFailure> {
    let n = cp.variable_count;
    let mut ri = Vec::new();
    let mut ci = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::with_capacity(rows.len());
    for (r, &row) in rows.iter().enumerate() {
        let c = &cp.constraints[row];
        for (j, a) in &c.terms {
            ri.push(r);
            ci.push(*j);
            vals.push(*a);
        }
        b.push(c.rhs);
    }
    let a = CscMatrix::new_from_triplets(rows.len(), n, ri, ci, vals);
    let (p, q) = if with_objective {
        let diag: Vec<usize> = (0..n).filter(|&i| cp.quadratic[i] != 0.0).collect();
        let p = CscMatrix::new_from_triplets(
            n,
            n,
            diag.clone(),
            diag.clone(),
            diag.iter().map(|&i| 2.0 * cp.quadratic[i]).collect(),
        );
        (p, cp.linear.clone())
    } else {
        (CscMatrix::zeros((n, n)), vec![0.0; n])
    };
    let cones = [SupportedConeT::NonnegativeConeT(rows.len())];
    let settings = DefaultSettings {
        verbose: false,
        max_iter: config.solver_max_iterations,
        tol_gap_abs: config.solver_tolerance * 1e-2,
        tol_gap_rel: config.solver_tolerance * 1e-2,
        tol_feas: 1e-9,
        ..DefaultSettings::default()
    };
    let mut solver =
        DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| SolverFailure(e.to_string()))?;
    solver.solve();
    Ok(Raw {
        x: solver.solution.x.clone(),
        status: solver.solution.status,
        iterations: solver.solution.iterations,
    })
}

fn is_infeasible(status: SolverStatus) -> bool {
    matches!(status, SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible)
}

/// Solves the program to the configured tolerance.
pub fn solve(cp: &ConvexProgram, config: &InferenceConfig) -> Result<SolveResult, SolverFailure> {
    if cp.variable_count == 0 {
        let feasible = cp.constraints.iter().all(|c| c.rhs >= -config.feasibility_tolerance);
        return Ok(SolveResult {
            assignment: Vec::new(),
            objective: cp.constant,
            status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            iterations: 0,
            conflict: if feasible {
                Vec::new()
            } else {
                (0..cp.constraints.len()).filter(|&i| cp.constraints[i].rhs < 0.0).take(1).collect()
            },
        });
    }
    let rows: Vec<usize> = (0..cp.constraints.len()).collect();
    let raw = run(cp, &rows, true, config)?;
    let status = match raw.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        s if is_infeasible(s) => SolveStatus::Infeasible,
        SolverStatus::MaxIterations | SolverStatus::MaxTime | SolverStatus::InsufficientProgress => {
            SolveStatus::IterationLimit
        }
        other => return Err(SolverFailure(format!("{other:?}"))),
    };
    if status == SolveStatus::Infeasible {
        return Ok(SolveResult {
            assignment: vec![0.0; cp.variable_count],
            objective: f64::INFINITY,
            status,
            iterations: raw.iterations,
            conflict: conflict_subset(cp, config)?,
        });
    }
    let mut x = raw.x;
    for &i in cp.atoms.values() {
        x[i] = x[i].clamp(0.0, 1.0);
    }
    Ok(SolveResult {
        objective: cp.objective(&x),
        assignment: x,
        status,
        iterations: raw.iterations,
        conflict: Vec::new(),
    })
}

/// Greedy deletion over the hard constraints: drop each one whose removal
/// keeps the remaining system infeasible.
fn conflict_subset(cp: &ConvexProgram, config: &InferenceConfig) -> Result<Vec<usize>, SolverFailure> {
    let bounds: Vec<usize> = (0..cp.constraints.len())
        .filter(|&i| matches!(cp.constraints[i].origin, Origin::Bound | Origin::SetCap(_)))
        .collect();
    let mut candidates: Vec<usize> = (0..cp.constraints.len())
        .filter(|&i| matches!(cp.constraints[i].origin, Origin::Hard(_) | Origin::Exclusivity { .. }))
        .collect();
    let infeasible = |subset: &[usize]| -> Result<bool, SolverFailure> {
        let rows: Vec<usize> = bounds.iter().chain(subset).copied().collect();
        Ok(is_infeasible(run(cp, &rows, false, config)?.status))
    };
    if !infeasible(&candidates)? {
        // the conflict involves soft-rule rows; report everything
        return Ok((0..cp.constraints.len()).filter(|i| !bounds.contains(i)).collect());
    }
    let mut i = 0;
    while i < candidates.len() {
        let mut trial = candidates.clone();
        trial.remove(i);
        if infeasible(&trial)? {
            candidates = trial;
        } else {
            i += 1;
        }
    }
    Ok(candidates)
}
