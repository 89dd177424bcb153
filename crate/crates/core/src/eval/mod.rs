//! Turning predictions into interdictions and scoring them.
//!
//! End-to-end decoding picks the most probable edges that fit the budget.
//! Predict-and-search instead fixes the most confident variables inside a
//! trust region and lets branch-and-bound finish the job.

mod anytime;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::Prediction;
use crate::instances::Instance;
use crate::milp::{solve_milp_with_extra, ExtraConstraint, ExtraRef, MilpSolution, SolverConfig};
use crate::oracle::{budget_feasible, evaluate_decision, TIE_TOL};
use crate::reduction::{MilpInstance, Relation, VarRef, Variable};

pub use anytime::{anytime_compare, AnytimeComparison};
pub use report::{evaluate, EvalItem, EvalReport, EvalRow, ModelStrategy, OracleStrategy, RandomTopK, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Oracle,
    Milp,
    Model,
    Random,
    PredictAndSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterdictionSolution {
    pub x: Vec<bool>,
    pub value: f64,
    pub method: Method,
}

/// Edge indices by descending probability, lower index first on ties.
pub fn rank_descending(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx
}

/// Picks edges in descending probability order while the budget allows.
/// For a cardinality budget this is the top-γ set. For a weighted budget an
/// edge that does not fit is skipped and the scan continues.
pub fn decode(probs: &[f64], inst: &Instance) -> Result<Vec<bool>> {
    if probs.len() != inst.edge_count() {
        return Err(Error::DimensionMismatch { expected: inst.edge_count(), got: probs.len() });
    }
    let mut x = vec![false; probs.len()];
    match inst {
        Instance::Spi(i) => {
            for &e in rank_descending(probs).iter().take(i.budget) {
                x[e] = true;
            }
        }
        Instance::Mfi(i) => {
            let mut spent = 0.0;
            for e in rank_descending(probs) {
                let r = i.edges[e].removal_cost;
                if spent + r <= i.budget + TIE_TOL {
                    spent += r;
                    x[e] = true;
                }
            }
        }
    }
    debug_assert!(budget_feasible(inst, &x));
    Ok(x)
}

/// Decodes a prediction and evaluates it with the exact follower solver.
pub fn end_to_end(pred: &Prediction, inst: &Instance) -> Result<InterdictionSolution> {
    let x = decode(&pred.probabilities, inst)?;
    let value = evaluate_decision(inst, &x)?;
    Ok(InterdictionSolution { x, value, method: Method::Model })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PnsConfig {
    /// Number of least probable variables pushed toward 0.
    pub k0: usize,
    /// Number of most probable variables pushed toward 1.
    pub k1: usize,
    /// Maximum number of those fixings that may be violated.
    pub delta: usize,
}

impl PnsConfig {
    pub fn validate(&self, w0: usize) -> Result<()> {
        if self.k0 + self.k1 > w0 {
            return Err(Error::InvalidConfig(format!(
                "k0 + k1 = {} exceeds the {w0} interdiction variables",
                self.k0 + self.k1
            )));
        }
        Ok(())
    }
}

/// `(I0, I1)`: I1 takes the k1 highest probabilities, I0 the k0 lowest among
/// the rest. Ties go to the lower index in both orders.
pub fn fixing_sets(probs: &[f64], cfg: &PnsConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    cfg.validate(probs.len())?;
    let desc = rank_descending(probs);
    let i1: Vec<usize> = desc[..cfg.k1].to_vec();
    let mut rest: Vec<usize> = desc[cfg.k1..].to_vec();
    rest.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(a.cmp(&b)));
    rest.truncate(cfg.k0);
    Ok((rest, i1))
}

/// Solves `milp` restricted to the trust region around the prediction:
/// `x_d <= δ_d` for d in I0, `1 - x_d <= δ_d` for d in I1, `Σ δ <= Δ`.
/// An empty region comes back with status `Infeasible`.
pub fn predict_and_search(
    pred: &Prediction,
    milp: &MilpInstance,
    cfg: &PnsConfig,
    solver: &SolverConfig,
) -> Result<MilpSolution> {
    let w0 = milp.interdiction_count();
    if pred.probabilities.len() != w0 {
        return Err(Error::DimensionMismatch { expected: w0, got: pred.probabilities.len() });
    }
    let (i0, i1) = fixing_sets(&pred.probabilities, cfg)?;
    let mut deltas = Vec::new();
    let mut rows = Vec::new();
    for (&d, one) in i0.iter().map(|d| (d, false)).chain(i1.iter().map(|d| (d, true))) {
        let k = deltas.len();
        deltas.push(Variable::binary(format!("delta_{d}"), 0.0));
        let x = ExtraRef::Base(VarRef::new(0, d));
        rows.push(if one {
            // 1 - x <= δ  <=>  -x - δ <= -1
            ExtraConstraint { coeffs: vec![(x, -1.0), (ExtraRef::Extra(k), -1.0)], relation: Relation::Le, rhs: -1.0 }
        } else {
            ExtraConstraint { coeffs: vec![(x, 1.0), (ExtraRef::Extra(k), -1.0)], relation: Relation::Le, rhs: 0.0 }
        });
    }
    if !deltas.is_empty() {
        rows.push(ExtraConstraint {
            coeffs: (0..deltas.len()).map(|k| (ExtraRef::Extra(k), 1.0)).collect(),
            relation: Relation::Le,
            rhs: cfg.delta as f64,
        });
    }
    solve_milp_with_extra(milp, &deltas, &rows, solver)
}
