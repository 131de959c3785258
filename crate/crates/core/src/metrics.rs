use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::ComparisonOutcome;

/// Mean absolute error.
pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("mae input"));
    }
    let total: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / predictions.len() as f64)
}

/// Normalized error `mae_post / mae_reg`; values below 1 mean the refinement helped.
pub fn beta(mae_post: f64, mae_reg: f64) -> Result<f64> {
    if mae_reg == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    if !(mae_reg.is_finite() && mae_post.is_finite()) || mae_reg < 0.0 || mae_post < 0.0 {
        return Err(Error::invalid(format!(
            "beta needs non-negative finite errors, got {mae_post} / {mae_reg}"
        )));
    }
    Ok(mae_post / mae_reg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PraReport {
    pub accuracy: f64,
    /// Outcomes that entered the ratio.
    pub evaluated: usize,
    /// Outcomes skipped because both items share the same ground-truth label.
    pub ties_excluded: usize,
}

/// Pairwise ranking accuracy: the fraction of outcomes whose direction agrees
/// with the ground-truth ordering. Tied pairs are excluded and counted.
pub fn pra(predicted: &[ComparisonOutcome], truth: &HashMap<String, f64>) -> Result<PraReport> {
    if predicted.is_empty() {
        return Err(Error::Empty("pra outcomes"));
    }
    let mut correct = 0usize;
    let mut evaluated = 0usize;
    let mut ties = 0usize;
    for o in predicted {
        let yq = *truth
            .get(&o.query_id)
            .ok_or_else(|| Error::UnknownId(o.query_id.clone()))?;
        let yr = *truth.get(&o.ref_id).ok_or_else(|| Error::UnknownId(o.ref_id.clone()))?;
        if yq == yr {
            ties += 1;
            continue;
        }
        evaluated += 1;
        if o.query_above == (yq > yr) {
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Empty("pra outcomes after excluding ties"));
    }
    if ties > 0 {
        log::info!("pra: excluded {ties} tied pair(s)");
    }
    Ok(PraReport {
        accuracy: correct as f64 / evaluated as f64,
        evaluated,
        ties_excluded: ties,
    })
}
