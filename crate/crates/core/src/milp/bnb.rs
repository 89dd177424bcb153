use std::time::Instant;

use super::simplex::{self, LpProblem, Outcome};
use super::{IncumbentEvent, MilpSolution, MilpStatus, SolverConfig, INTEGRALITY_TOL, OBJECTIVE_TOL};
use crate::error::{Error, Result};

struct Node {
    id: usize,
    /// LP value of the parent (a valid lower bound for this subtree).
    bound: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

struct Incumbent {
    value: f64,
    x: Vec<f64>,
}

/// Most fractional integer column; ties go to the lowest index.
fn branching_column(problem: &LpProblem, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in x.iter().enumerate() {
        if !problem.integer[j] {
            continue;
        }
        let frac = v - v.floor();
        let dist = frac.min(1.0 - frac);
        if dist > INTEGRALITY_TOL && best.is_none_or(|(_, d)| dist > d + 1e-12) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Minimizes `problem`. Depth-first until a first incumbent exists, then
/// best-bound (ties by node id).
pub(super) fn branch_and_bound(problem: &LpProblem, cfg: &SolverConfig) -> Result<MilpSolution> {
    let start = Instant::now();
    let elapsed_ms = || start.elapsed().as_secs_f64() * 1e3;
    let mut open = vec![Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        lower: problem.lower.clone(),
        upper: problem.upper.clone(),
    }];
    let mut next_id = 1;
    let mut node_count = 0usize;
    let mut incumbent: Option<Incumbent> = None;
    let mut log = Vec::new();

    let finish = |status, incumbent: Option<Incumbent>, bound: Option<f64>, node_count, log| MilpSolution {
        status,
        value: incumbent.as_ref().map(|i: &Incumbent| i.value),
        assignment: incumbent.map(|i| i.x),
        best_bound: bound,
        node_count,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        incumbent_log: log,
    };

    loop {
        let global_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        if open.is_empty() {
            break;
        }
        if let Some(inc) = &incumbent {
            if global_bound >= inc.value - cfg.gap_tol {
                break;
            }
        }
        let over_time = cfg.time_limit_ms.is_some_and(|t| elapsed_ms() >= t as f64);
        let over_nodes = cfg.node_limit.is_some_and(|n| node_count >= n);
        if over_time || over_nodes {
            let bound = incumbent.as_ref().map_or(global_bound, |i| global_bound.min(i.value));
            let bound = bound.is_finite().then_some(bound);
            return Ok(finish(MilpStatus::BudgetExceeded, incumbent, bound, node_count, log));
        }

        let pick = if incumbent.is_none() {
            open.len() - 1
        } else {
            let mut best = 0;
            for (k, n) in open.iter().enumerate() {
                let b = &open[best];
                if n.bound < b.bound || (n.bound == b.bound && n.id < b.id) {
                    best = k;
                }
            }
            best
        };
        let node = open.swap_remove(pick);
        if let Some(inc) = &incumbent {
            if node.bound >= inc.value - OBJECTIVE_TOL {
                continue;
            }
        }

        node_count += 1;
        let (value, x) = match simplex::solve(problem, &node.lower, &node.upper) {
            Outcome::Optimal { value, x } => (value, x),
            Outcome::Infeasible => continue,
            Outcome::Unbounded => return Err(Error::InvalidMilp("LP relaxation is unbounded".into())),
            Outcome::Numerical(msg) => return Err(Error::Numerical(msg)),
        };
        if let Some(inc) = &incumbent {
            if value >= inc.value - OBJECTIVE_TOL {
                continue;
            }
        }

        match branching_column(problem, &x) {
            None => {
                let mut x = x;
                for (j, v) in x.iter_mut().enumerate() {
                    if problem.integer[j] {
                        *v = v.round();
                    }
                }
                let value: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if incumbent.as_ref().is_none_or(|i| value < i.value - OBJECTIVE_TOL) {
                    log.push(IncumbentEvent { time_ms: elapsed_ms(), value });
                    incumbent = Some(Incumbent { value, x });
                }
            }
            Some(j) => {
                let floor = x[j].floor();
                let mut down = Node { id: 0, bound: value, lower: node.lower.clone(), upper: node.upper.clone() };
                down.upper[j] = floor;
                let mut up = Node { id: 0, bound: value, lower: node.lower, upper: node.upper };
                up.lower[j] = floor + 1.0;
                // The child on the rounding side is pushed last so the dive takes it first.
                let children = if x[j] - floor >= 0.5 { [down, up] } else { [up, down] };
                for mut child in children {
                    child.id = next_id;
                    next_id += 1;
                    open.push(child);
                }
            }
        }
    }

    let status = if incumbent.is_some() { MilpStatus::Optimal } else { MilpStatus::Infeasible };
    let bound = incumbent.as_ref().map(|i| i.value);
    Ok(finish(status, incumbent, bound, node_count, log))
}
