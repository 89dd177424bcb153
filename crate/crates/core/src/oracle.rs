//! Brute-force ground truth: enumerate every budget-feasible interdiction and
//! evaluate the follower exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::{max_flow, shortest_path};
use crate::instances::{Instance, MfiInstance, SpiInstance};
use crate::milp::{solve_milp, MilpStatus, SolverConfig};
use crate::reduction::{reduce, MilpInstance};

pub const ENUMERATION_LIMIT: u128 = 10_000_000;
/// Values within this distance of the best count as ties.
pub const TIE_TOL: f64 = 1e-9;
pub const CROSS_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Lexicographically smallest optimal decision (false < true, edge order).
    pub best_x: Vec<bool>,
    pub value: f64,
    pub evaluated_count: usize,
    /// Every optimal decision, in enumeration order.
    pub all_optima: Vec<Vec<bool>>,
}

/// Follower value of a decision: shortest path length for spi, max flow for mfi.
pub fn evaluate_decision(inst: &Instance, x: &[bool]) -> Result<f64> {
    match inst {
        Instance::Spi(i) => Ok(shortest_path(i, x)?.length_or_inf()),
        Instance::Mfi(i) => Ok(max_flow(i, x)?.value),
    }
}

pub fn budget_feasible(inst: &Instance, x: &[bool]) -> bool {
    match inst {
        Instance::Spi(i) => x.iter().filter(|&&b| b).count() <= i.budget,
        Instance::Mfi(i) => {
            let spent: f64 = i.edges.iter().zip(x).filter(|(_, &b)| b).map(|(e, _)| e.removal_cost).sum();
            spent <= i.budget + TIE_TOL
        }
    }
}

fn binomial_prefix_sum(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for i in 0..=k.min(n) {
        if i > 0 {
            c = c * (n - i + 1) as u128 / i as u128;
        }
        total += c;
        if total > ENUMERATION_LIMIT {
            return total;
        }
    }
    total
}

struct Tracker {
    maximize: bool,
    best: Option<f64>,
    optima: Vec<Vec<bool>>,
    evaluated: usize,
}

impl Tracker {
    fn offer(&mut self, x: &[bool], v: f64) {
        self.evaluated += 1;
        let better = match self.best {
            None => true,
            Some(b) if self.maximize => v > b + TIE_TOL,
            Some(b) => v < b - TIE_TOL,
        };
        if better {
            self.best = Some(v);
            self.optima.clear();
            self.optima.push(x.to_vec());
        } else if self.best.is_some_and(|b| (v - b).abs() <= TIE_TOL) {
            self.optima.push(x.to_vec());
        }
    }

    fn finish(self) -> OracleResult {
        let mut best_x = self.optima[0].clone();
        for o in &self.optima {
            // false < true elementwise gives the lexicographic order we want.
            if o < &best_x {
                best_x = o.clone();
            }
        }
        OracleResult {
            best_x,
            value: self.best.unwrap_or(f64::NAN),
            evaluated_count: self.evaluated,
            all_optima: self.optima,
        }
    }
}

/// Maximizes the shortest-path length over all decisions with at most
/// `budget` interdictions.
pub fn brute_force_spi(inst: &SpiInstance) -> Result<OracleResult> {
    inst.validate()?;
    let m = inst.edges.len();
    let count = binomial_prefix_sum(m, inst.budget);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { count, limit: ENUMERATION_LIMIT });
    }
    let mut t = Tracker { maximize: true, best: None, optima: Vec::new(), evaluated: 0 };
    let mut x = vec![false; m];
    for k in 0..=inst.budget.min(m) {
        // Index combinations of size k in lexicographic order.
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            idx.iter().for_each(|&i| x[i] = true);
            let v = shortest_path(inst, &x)?.length_or_inf();
            t.offer(&x, v);
            idx.iter().for_each(|&i| x[i] = false);

            let mut pos = k;
            while pos > 0 && idx[pos - 1] == m - k + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for q in pos..k {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    Ok(t.finish())
}

fn count_knapsack_subsets(costs: &[f64], budget: f64) -> u128 {
    fn rec(costs: &[f64], from: usize, left: f64, acc: &mut u128) {
        *acc += 1;
        if *acc > ENUMERATION_LIMIT {
            return;
        }
        for k in from..costs.len() {
            if costs[k] <= left + TIE_TOL {
                rec(costs, k + 1, left - costs[k], acc);
                if *acc > ENUMERATION_LIMIT {
                    return;
                }
            }
        }
    }
    let mut acc = 0;
    rec(costs, 0, budget, &mut acc);
    acc
}

/// Minimizes the max flow over all removal sets within the removal budget.
pub fn brute_force_mfi(inst: &MfiInstance) -> Result<OracleResult> {
    inst.validate()?;
    let costs: Vec<f64> = inst.edges.iter().map(|e| e.removal_cost).collect();
    let count = count_knapsack_subsets(&costs, inst.budget);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { count, limit: ENUMERATION_LIMIT });
    }
    fn rec(inst: &MfiInstance, costs: &[f64], from: usize, left: f64, x: &mut Vec<bool>, t: &mut Tracker) -> Result<()> {
        t.offer(x, max_flow(inst, x)?.value);
        for k in from..costs.len() {
            if costs[k] <= left + TIE_TOL {
                x[k] = true;
                rec(inst, costs, k + 1, left - costs[k], x, t)?;
                x[k] = false;
            }
        }
        Ok(())
    }
    let mut t = Tracker { maximize: false, best: None, optima: Vec::new(), evaluated: 0 };
    let mut x = vec![false; costs.len()];
    rec(inst, &costs, 0, inst.budget, &mut x, &mut t)?;
    Ok(t.finish())
}

pub fn brute_force(inst: &Instance) -> Result<OracleResult> {
    match inst {
        Instance::Spi(i) => brute_force_spi(i),
        Instance::Mfi(i) => brute_force_mfi(i),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckReport {
    pub passed: bool,
    pub oracle_value: f64,
    pub oracle_x: Vec<bool>,
    pub milp_status: MilpStatus,
    pub milp_value: Option<f64>,
    pub milp_x: Option<Vec<bool>>,
    /// Follower value of the MILP's decision, recomputed by the inner solver.
    pub milp_x_value: Option<f64>,
    pub milp_x_budget_feasible: bool,
    pub failures: Vec<String>,
}

/// Compares the oracle with branch-and-bound on the reduced MILP.
pub fn cross_check(inst: &Instance) -> Result<CrossCheckReport> {
    cross_check_milp(inst, &reduce(inst)?)
}

/// As [`cross_check`] but against a caller-supplied MILP, e.g. one that was
/// modified on purpose.
pub fn cross_check_milp(inst: &Instance, milp: &MilpInstance) -> Result<CrossCheckReport> {
    let oracle = brute_force(inst)?;
    let sol = solve_milp(milp, &SolverConfig::default())?;
    let mut failures = Vec::new();
    if sol.status != MilpStatus::Optimal {
        failures.push(format!("MILP status {:?}", sol.status));
    }
    let milp_x = sol.interdiction(milp);
    let milp_x_value = milp_x.as_ref().map(|x| evaluate_decision(inst, x)).transpose()?;
    let feasible = milp_x.as_ref().is_some_and(|x| budget_feasible(inst, x));
    if let Some(v) = sol.value {
        if (v - oracle.value).abs() > CROSS_CHECK_TOL {
            failures.push(format!("MILP value {v} differs from oracle value {}", oracle.value));
        }
    }
    if milp_x.is_some() && !feasible {
        failures.push("MILP decision violates the budget".into());
    }
    if let (Some(xv), Some(v)) = (milp_x_value, sol.value) {
        if (xv - v).abs() > CROSS_CHECK_TOL {
            failures.push(format!("MILP decision evaluates to {xv}, MILP objective is {v}"));
        }
    }
    Ok(CrossCheckReport {
        passed: failures.is_empty(),
        oracle_value: oracle.value,
        oracle_x: oracle.best_x,
        milp_status: sol.status,
        milp_value: sol.value,
        milp_x,
        milp_x_value,
        milp_x_budget_feasible: feasible,
        failures,
    })
}

/// One line of a label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub instance: String,
    pub optimal_value: f64,
    pub label_x: Vec<u8>,
    pub n_optima: usize,
}

impl LabelRecord {
    pub fn from_oracle(id: impl Into<String>, r: &OracleResult) -> Self {
        LabelRecord {
            instance: id.into(),
            optimal_value: r.value,
            label_x: r.best_x.iter().map(|&b| b as u8).collect(),
            n_optima: r.all_optima.len(),
        }
    }

    pub fn label(&self) -> Vec<bool> {
        self.label_x.iter().map(|&b| b != 0).collect()
    }
}

/// Labels an instance: by enumeration when `method` is oracle, otherwise by
/// branch-and-bound proven optimal. MILP labels report `n_optima = 1`.
pub fn label_instance(id: &str, inst: &Instance, use_milp: bool) -> Result<LabelRecord> {
    if !use_milp {
        return Ok(LabelRecord::from_oracle(id, &brute_force(inst)?));
    }
    let milp = reduce(inst)?;
    let sol = solve_milp(&milp, &SolverConfig::default())?;
    match (sol.status, sol.value, sol.interdiction(&milp)) {
        (MilpStatus::Optimal, Some(v), Some(x)) => Ok(LabelRecord {
            instance: id.to_string(),
            optimal_value: v,
            label_x: x.iter().map(|&b| b as u8).collect(),
            n_optima: 1,
        }),
        (status, ..) => Err(Error::InvalidMilp(format!("labeling solve ended with {status:?}"))),
    }
}
