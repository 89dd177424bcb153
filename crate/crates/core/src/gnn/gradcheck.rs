use serde::{Deserialize, Serialize};

use super::model::GnnModel;
use crate::encoding::MmilpGraph;
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat parameter index of the worst slot.
    pub worst_index: Option<usize>,
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares backprop gradients with central differences on `samples`
/// randomly chosen parameter slots.
pub fn gradient_check(
    model: &GnnModel,
    g: &MmilpGraph,
    label: &[bool],
    samples: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grad) = model.backward(g, label)?;
    let analytic = grad.flatten();
    let base = model.params.flatten();
    let mut r = rng::seeded(seed);
    let mut probe = model.clone();
    let mut report = GradCheckReport { checked: 0, max_rel_error: 0.0, worst_index: None };
    for _ in 0..samples {
        let i = rng::below(&mut r, base.len());
        let mut flat = base.clone();
        flat[i] = base[i] + h;
        probe.params.set_flat(&flat)?;
        let plus = super::loss(&probe.forward(g)?, label)?;
        flat[i] = base[i] - h;
        probe.params.set_flat(&flat)?;
        let minus = super::loss(&probe.forward(g)?, label)?;
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric, 1e-6);
        if report.worst_index.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = Some(i);
        }
        report.checked += 1;
    }
    Ok(report)
}
