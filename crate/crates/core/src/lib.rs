//! Post-hoc refinement of regression predictions with pairwise rankings.
//!
//! A query's regressor prediction is combined with a rank-based estimate
//! obtained from comparisons against references of known value:
//!
//! 1. a ranker (simulated, file-backed, human or LLM) says whether the query
//!    lies above or below each reference ([`rankers`]);
//! 2. the Bradley–Terry likelihood of those outcomes is minimized to get a
//!    rank estimate and its Fisher-information variance ([`rank`]);
//! 3. the two estimates are fused by inverse-variance weighting ([`fusion`]).
//!
//! [`baselines`] holds the interval-projection and nearest-neighbour
//! refinements used for comparison, and [`metrics`] the evaluation measures.

pub mod baselines;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod model;
pub mod rank;
pub mod rankers;
pub mod seeding;

pub use error::{Error, ErrorKind, Result};
pub use fusion::{fuse, FusedEstimate};
pub use model::{
    resplit, ComparisonOutcome, ComparisonSet, DataRow, Dataset, LabeledReference, ReferenceSet, RegressorEstimate,
    SplitSpec,
};
pub use rank::{solve_rank_estimate, RankEstimate, SolverConfig};
pub use seeding::Substream;

/// Refines one regressor estimate with a comparison set.
///
/// Returns `None` for the rank part when the set is empty, in which case the
/// fused value is the regressor's. `clamp_c`, when given, floors the rank
/// variance at `clamp_c` times the regressor variance before fusion.
pub fn refine(
    reg: &RegressorEstimate,
    comparisons: &ComparisonSet,
    solver: &SolverConfig,
    clamp_c: Option<f64>,
) -> Result<(Option<RankEstimate>, FusedEstimate)> {
    if comparisons.is_empty() {
        return Ok((
            None,
            FusedEstimate {
                value: reg.value,
                variance: reg.variance,
                weight_reg: 1.0,
                weight_rank: 0.0,
            },
        ));
    }
    let mut rank = solve_rank_estimate(comparisons, solver)?;
    if let Some(c) = clamp_c {
        rank.variance = fusion::regularize_rank_variance(rank.variance, reg.variance, c)?;
    }
    let fused = fuse(reg, &rank)?;
    Ok((Some(rank), fused))
}
