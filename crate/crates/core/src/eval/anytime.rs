use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{predict_and_search, PnsConfig};
use crate::error::Result;
use crate::gnn::Prediction;
use crate::milp::{solve_milp, MilpSolution, SolverConfig};
use crate::reduction::{MilpInstance, Sense};

/// Plain branch-and-bound and predict-and-search on the same instance under
/// the same limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnytimeComparison {
    pub sense: Sense,
    pub plain: MilpSolution,
    pub guided: MilpSolution,
}

impl AnytimeComparison {
    /// Whether the guided run's first incumbent is at least as good as the
    /// plain run's. A run with no incumbent loses to one with an incumbent.
    pub fn guided_first_no_worse(&self) -> bool {
        let first = |s: &MilpSolution| s.incumbent_log.first().map(|e| e.value);
        match (first(&self.guided), first(&self.plain)) {
            (Some(g), Some(p)) => match self.sense {
                Sense::Max => g >= p - 1e-9,
                Sense::Min => g <= p + 1e-9,
            },
            (Some(_), None) | (None, None) => true,
            (None, Some(_)) => false,
        }
    }

    /// Rows `method,time_ms,value` for both runs.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "method,time_ms,value")?;
        for (name, sol) in [("plain", &self.plain), ("predict-and-search", &self.guided)] {
            for e in &sol.incumbent_log {
                writeln!(w, "{name},{},{}", e.time_ms, e.value)?;
            }
        }
        Ok(())
    }
}

/// Runs both solves one after the other with the same time limit.
pub fn anytime_compare(
    milp: &MilpInstance,
    pred: &Prediction,
    cfg: &PnsConfig,
    time_limit_ms: u64,
) -> Result<AnytimeComparison> {
    let solver = SolverConfig { time_limit_ms: Some(time_limit_ms), ..SolverConfig::default() };
    let plain = solve_milp(milp, &solver)?;
    let guided = predict_and_search(pred, milp, cfg, &solver)?;
    Ok(AnytimeComparison { sense: milp.sense, plain, guided })
}
