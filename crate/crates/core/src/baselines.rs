//! Reference refinement methods: interval projection and regression by
//! re-ranking (nearest-neighbour prediction averaging).

use crate::error::{Error, Result};
use crate::model::{ComparisonSet, Dataset};

/// Interval implied by a comparison set: the query must exceed every label
/// ranked below it and stay under every label ranked above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleInterval {
    /// Largest label ranked below the query, `-inf` if none.
    pub lower: f64,
    /// Smallest label ranked above the query, `+inf` if none.
    pub upper: f64,
}

impl FeasibleInterval {
    pub fn from_comparisons(comparisons: &ComparisonSet) -> Self {
        FeasibleInterval {
            lower: comparisons.below().iter().copied().fold(f64::NEG_INFINITY, f64::max),
            upper: comparisons.above().iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Noisy rankers can produce `lower > upper`.
    pub fn is_consistent(&self) -> bool {
        self.lower <= self.upper
    }
}

/// Clamps `y_pred` into the feasible interval; for an inconsistent interval
/// returns its midpoint `(lower + upper) / 2`.
pub fn projection_refine(y_pred: f64, comparisons: &ComparisonSet) -> f64 {
    let interval = FeasibleInterval::from_comparisons(comparisons);
    if interval.is_consistent() {
        y_pred.min(interval.upper).max(interval.lower)
    } else {
        0.5 * (interval.lower + interval.upper)
    }
}

/// Weight kernel for neighbour predictions in [`rbr_refine`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NeighborWeighting {
    /// Query weight 1, neighbour weight `1 / (1 + distance)`.
    #[default]
    InverseDistance,
    Uniform,
}

impl NeighborWeighting {
    fn weight(self, distance: f64) -> f64 {
        match self {
            NeighborWeighting::InverseDistance => 1.0 / (1.0 + distance),
            NeighborWeighting::Uniform => 1.0,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Averages the query prediction with the predictions of its `k` nearest
/// training rows (Euclidean distance on features, ties by row order).
pub fn rbr_refine(
    query_features: &[f64],
    query_pred: f64,
    train: &Dataset,
    train_preds: &[f64],
    k: usize,
    weighting: NeighborWeighting,
) -> Result<f64> {
    if query_features.len() != train.dim() {
        return Err(Error::invalid(format!(
            "query has {} features, training data has {}",
            query_features.len(),
            train.dim()
        )));
    }
    if train_preds.len() != train.len() {
        return Err(Error::LengthMismatch {
            left: train_preds.len(),
            right: train.len(),
        });
    }
    if k > train.len() {
        return Err(Error::Size(format!("k = {k} exceeds {} training rows", train.len())));
    }
    let mut by_distance: Vec<(f64, usize)> = train
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| (euclidean(query_features, &row.features), i))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut numerator = query_pred;
    let mut denominator = 1.0;
    for &(distance, i) in by_distance.iter().take(k) {
        let w = weighting.weight(distance);
        numerator += w * train_preds[i];
        denominator += w;
    }
    Ok(numerator / denominator)
}
