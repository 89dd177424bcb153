use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decode, Method};
use crate::encoding::build_graph;
use crate::error::Result;
use crate::gnn::GnnModel;
use crate::instances::Instance;
use crate::oracle::{brute_force, evaluate_decision};
use crate::reduction::reduce;
use crate::rng;

/// An instance with its known optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub instance: Instance,
    pub optimal_value: f64,
    /// An optimal decision, when known.
    pub label: Option<Vec<bool>>,
}

/// A way of choosing an interdiction for an instance.
pub trait Strategy: Sync {
    fn method(&self) -> Method;
    fn decide(&self, item: &EvalItem) -> Result<Vec<bool>>;
}

/// Returns the known optimal decision, or enumerates one.
pub struct OracleStrategy;

impl Strategy for OracleStrategy {
    fn method(&self) -> Method {
        Method::Oracle
    }

    fn decide(&self, item: &EvalItem) -> Result<Vec<bool>> {
        match &item.label {
            Some(x) => Ok(x.clone()),
            None => Ok(brute_force(&item.instance)?.best_x),
        }
    }
}

/// Decodes uniform random scores drawn from a per-instance seed, so the
/// choice for an instance does not depend on what else is evaluated.
pub struct RandomTopK {
    pub seed: u64,
}

impl Strategy for RandomTopK {
    fn method(&self) -> Method {
        Method::Random
    }

    fn decide(&self, item: &EvalItem) -> Result<Vec<bool>> {
        let mut r = rng::seeded(rng::keyed_hash(self.seed, &item.id));
        let probs: Vec<f64> = (0..item.instance.edge_count()).map(|_| rng::unit(&mut r)).collect();
        decode(&probs, &item.instance)
    }
}

/// Reduces, encodes and runs the network, then decodes its prediction.
/// Random feature columns are seeded per instance id.
pub struct ModelStrategy<'a> {
    pub model: &'a GnnModel,
    pub graph_seed: u64,
}

impl ModelStrategy<'_> {
    pub fn probabilities(&self, id: &str, inst: &Instance) -> Result<Vec<f64>> {
        let milp = reduce(inst)?;
        let g = build_graph(&milp, self.model.config.random_dim, rng::keyed_hash(self.graph_seed, id))?;
        Ok(self.model.forward(&g)?.probabilities)
    }
}

impl Strategy for ModelStrategy<'_> {
    fn method(&self) -> Method {
        Method::Model
    }

    fn decide(&self, item: &EvalItem) -> Result<Vec<bool>> {
        decode(&self.probabilities(&item.id, &item.instance)?, &item.instance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub achieved: f64,
    pub optimal: f64,
    /// `achieved / optimal`; absent when the optimum is 0. At most 1 for
    /// shortest-path interdiction (higher is better), at least 1 for max-flow
    /// interdiction (lower is better).
    pub ratio: Option<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    /// Rows sorted by instance id.
    pub rows: Vec<EvalRow>,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    /// Rows that contributed a ratio.
    pub ratio_count: usize,
    pub gap_mean: f64,
    pub gap_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn from_rows(method: Method, mut rows: Vec<EvalRow>) -> Self {
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        let (ratio_mean, ratio_std) = mean_std(&ratios);
        let (gap_mean, gap_std) = mean_std(&gaps);
        EvalReport { method, ratio_count: ratios.len(), rows, ratio_mean, ratio_std, gap_mean, gap_std }
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "id,achieved,optimal,ratio,gap")?;
        for r in &self.rows {
            let ratio = r.ratio.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", r.id, r.achieved, r.optimal, ratio, r.gap)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{:?}: ratio {:.4} ± {:.4} over {} instances, gap {:.4} ± {:.4}",
            self.method, self.ratio_mean, self.ratio_std, self.ratio_count, self.gap_mean, self.gap_std
        )
    }
}

/// Scores `strategy` on every item. The result does not depend on item order.
pub fn evaluate(items: &[EvalItem], strategy: &dyn Strategy) -> Result<EvalReport> {
    let rows: Vec<EvalRow> = items
        .par_iter()
        .map(|item| {
            let x = strategy.decide(item)?;
            let achieved = evaluate_decision(&item.instance, &x)?;
            let optimal = item.optimal_value;
            let ratio = if optimal.abs() > 0.0 { Some(achieved / optimal) } else { None };
            Ok(EvalRow { id: item.id.clone(), achieved, optimal, ratio, gap: (achieved - optimal).abs() })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::from_rows(strategy.method(), rows))
}
