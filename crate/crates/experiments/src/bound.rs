use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use rankrefine_core::fusion::{fuse_gaussian, required_rank_variance};
use rankrefine_core::Substream;

use crate::error::{invalid, Result};

pub const MIN_BOUND_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRecord {
    pub alpha: f64,
    pub empirical_beta: f64,
    pub n_samples: usize,
}

/// Monte-Carlo check of the error-reduction bound. For each `alpha` the rank
/// variance is set to the value that should give `MAE_post = alpha · MAE_reg`
/// against a unit-variance regressor; both estimates are drawn around a true
/// value of 0, fused, and the ratio of summed absolute errors reported.
pub fn validate_bound(alphas: &[f64], n_samples: usize, seed: u64) -> Result<Vec<BoundRecord>> {
    if n_samples < MIN_BOUND_SAMPLES {
        return invalid(format!("n_samples must be >= {MIN_BOUND_SAMPLES}, got {n_samples}"));
    }
    if alphas.is_empty() {
        return invalid("no alpha values given");
    }
    let rank_vars = alphas
        .iter()
        .map(|&a| required_rank_variance(a, 1.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    alphas
        .par_iter()
        .zip(rank_vars)
        .map(|(&alpha, rank_var)| {
            let mut rng = Substream::new(seed, "bound").with_f64(alpha).rng();
            let rank_sd = rank_var.sqrt();
            let (mut err_reg, mut err_post) = (0.0, 0.0);
            for _ in 0..n_samples {
                let z_reg: f64 = StandardNormal.sample(&mut rng);
                let z_rank: f64 = StandardNormal.sample(&mut rng);
                let fused = fuse_gaussian((z_reg, 1.0), (rank_sd * z_rank, rank_var))?;
                err_reg += z_reg.abs();
                err_post += fused.value.abs();
            }
            Ok(BoundRecord {
                alpha,
                empirical_beta: err_post / err_reg,
                n_samples,
            })
        })
        .collect()
}
