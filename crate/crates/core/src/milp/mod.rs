//! Exact MILP solving: dense simplex relaxations inside branch-and-bound.
//!
//! Sizes are capped at [`MAX_VARIABLES`] variables and [`MAX_ROWS`]
//! constraints; the tableau is dense.

mod bnb;
pub(crate) mod simplex;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::{MilpInstance, Relation, Sense, VarRef, Variable};
use simplex::{LpProblem, Outcome, Row};

pub const MAX_VARIABLES: usize = 5_000;
pub const MAX_ROWS: usize = 5_000;
pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const OBJECTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective in the instance's own sense; `None` unless optimal.
    pub value: Option<f64>,
    /// Flat primal assignment (group 0 first); empty unless optimal.
    pub primal: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub node_limit: Option<usize>,
    pub time_limit_ms: Option<u64>,
    /// Absolute gap at which the search stops and reports optimality.
    pub gap_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { node_limit: None, time_limit_ms: None, gap_tol: OBJECTIVE_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    BudgetExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncumbentEvent {
    pub time_ms: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best objective found, in the instance's own sense.
    pub value: Option<f64>,
    /// Flat assignment over the base instance's variables.
    pub assignment: Option<Vec<f64>>,
    /// Best proven bound when the search stopped.
    pub best_bound: Option<f64>,
    pub node_count: usize,
    pub wall_time_ms: f64,
    pub incumbent_log: Vec<IncumbentEvent>,
}

impl MilpSolution {
    /// Interdiction decisions (group 0) of the incumbent, if any.
    pub fn interdiction(&self, milp: &MilpInstance) -> Option<Vec<bool>> {
        self.assignment
            .as_ref()
            .map(|a| a[..milp.interdiction_count()].iter().map(|&v| v > 0.5).collect())
    }

    /// Incumbent log as `time_ms,value` CSV.
    pub fn write_incumbent_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "time_ms,value")?;
        for e in &self.incumbent_log {
            writeln!(out, "{},{}", e.time_ms, e.value)?;
        }
        Ok(())
    }
}

/// A reference from an added constraint into the base instance or the added
/// variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtraRef {
    Base(VarRef),
    Extra(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraConstraint {
    pub coeffs: Vec<(ExtraRef, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

fn to_problem(milp: &MilpInstance, extra_vars: &[Variable], extra_rows: &[ExtraConstraint], relaxed: bool) -> Result<LpProblem> {
    milp.validate()?;
    let base = milp.var_count();
    let total = base + extra_vars.len();
    let rows = milp.constraints.len() + extra_rows.len();
    if total > MAX_VARIABLES || rows > MAX_ROWS {
        return Err(Error::ProblemTooLarge(format!(
            "{total} variables / {rows} constraints (limits {MAX_VARIABLES} / {MAX_ROWS})"
        )));
    }
    let sign = match milp.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let vars: Vec<&Variable> = milp.flat_vars().chain(extra_vars.iter()).collect();
    for v in &vars {
        if !(v.lower.is_finite() && v.upper.is_finite()) || v.lower > v.upper {
            return Err(Error::InvalidMilp(format!("variable {} needs finite bounds", v.name)));
        }
    }
    let offsets = milp.group_offsets();
    let mut out_rows: Vec<Row> = milp
        .constraints
        .iter()
        .map(|c| Row {
            coeffs: c.coeffs.iter().map(|(r, a)| (offsets[r.group] + r.index, *a)).collect(),
            relation: c.relation,
            rhs: c.rhs,
        })
        .collect();
    for (k, c) in extra_rows.iter().enumerate() {
        let mut coeffs = Vec::with_capacity(c.coeffs.len());
        for (r, a) in &c.coeffs {
            let j = match *r {
                ExtraRef::Base(v) => {
                    if v.group >= milp.groups.len() || v.index >= milp.groups[v.group].vars.len() {
                        return Err(Error::InvalidMilp(format!("extra constraint {k} references missing {v:?}")));
                    }
                    offsets[v.group] + v.index
                }
                ExtraRef::Extra(i) if i < extra_vars.len() => base + i,
                ExtraRef::Extra(i) => {
                    return Err(Error::InvalidMilp(format!("extra constraint {k} references missing extra variable {i}")))
                }
            };
            coeffs.push((j, *a));
        }
        out_rows.push(Row { coeffs, relation: c.relation, rhs: c.rhs });
    }
    Ok(LpProblem {
        objective: vars.iter().map(|v| sign * v.objective).collect(),
        lower: vars.iter().map(|v| v.lower).collect(),
        upper: vars.iter().map(|v| v.upper).collect(),
        integer: vars.iter().map(|v| !relaxed && v.is_integer()).collect(),
        rows: out_rows,
    })
}

/// Solves the LP of `milp`. With `relaxed` set, integrality is dropped;
/// otherwise every integer variable must already be fixed by its bounds.
pub fn solve_lp(milp: &MilpInstance, relaxed: bool) -> Result<LpResult> {
    let problem = to_problem(milp, &[], &[], true)?;
    if !relaxed {
        if let Some(v) = milp.flat_vars().find(|v| v.is_integer() && v.upper - v.lower > 0.0) {
            return Err(Error::InvalidMilp(format!(
                "integer variable {} is not fixed; solve the relaxation or the MILP",
                v.name
            )));
        }
    }
    let sign = if milp.sense == Sense::Max { -1.0 } else { 1.0 };
    Ok(match simplex::solve(&problem, &problem.lower, &problem.upper) {
        Outcome::Optimal { value, x } => LpResult {
            status: LpStatus::Optimal,
            value: Some(sign * value),
            primal: x,
            diagnostic: None,
        },
        Outcome::Infeasible => LpResult { status: LpStatus::Infeasible, value: None, primal: vec![], diagnostic: None },
        Outcome::Unbounded => LpResult { status: LpStatus::Unbounded, value: None, primal: vec![], diagnostic: None },
        Outcome::Numerical(msg) => LpResult {
            status: LpStatus::NumericalFailure,
            value: None,
            primal: vec![],
            diagnostic: Some(msg),
        },
    })
}

/// Branch-and-bound on `milp`.
pub fn solve_milp(milp: &MilpInstance, cfg: &SolverConfig) -> Result<MilpSolution> {
    solve_milp_with_extra(milp, &[], &[], cfg)
}

/// Branch-and-bound on `milp` augmented with extra variables and rows; the
/// base instance is left untouched. The returned assignment covers only the
/// base variables.
pub fn solve_milp_with_extra(
    milp: &MilpInstance,
    extra_vars: &[Variable],
    extra_constraints: &[ExtraConstraint],
    cfg: &SolverConfig,
) -> Result<MilpSolution> {
    let problem = to_problem(milp, extra_vars, extra_constraints, false)?;
    let mut sol = bnb::branch_and_bound(&problem, cfg)?;
    let sign = if milp.sense == Sense::Max { -1.0 } else { 1.0 };
    sol.value = sol.value.map(|v| sign * v);
    sol.best_bound = sol.best_bound.map(|v| sign * v);
    for e in &mut sol.incumbent_log {
        e.value *= sign;
    }
    if let Some(a) = &mut sol.assignment {
        a.truncate(milp.var_count());
    }
    Ok(sol)
}
