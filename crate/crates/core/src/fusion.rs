//! Inverse-variance fusion of the regressor and rank estimates, the variance
//! clamp for over-confident rankers, and the error-ratio calculus that follows
//! from Gaussian errors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RegressorEstimate;
use crate::rank::RankEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedEstimate {
    pub value: f64,
    pub variance: f64,
    /// Weight on the regressor value; the rank value gets `weight_rank = 1 - weight_reg`.
    pub weight_reg: f64,
    pub weight_rank: f64,
}

fn check_variance(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} variance must be positive and finite, got {v}"
        )))
    }
}

/// Minimum-variance unbiased combination of two independent Gaussian estimates.
///
/// The result is symmetric in its arguments; `weight_reg` is the weight of the
/// first estimate.
pub fn fuse_gaussian(first: (f64, f64), second: (f64, f64)) -> Result<FusedEstimate> {
    let (y1, v1) = first;
    let (y2, v2) = second;
    check_variance(v1, "first")?;
    check_variance(v2, "second")?;
    if !(y1.is_finite() && y2.is_finite()) {
        return Err(Error::NonFinite("fusion input value".into()));
    }
    let variance = 1.0 / (1.0 / v1 + 1.0 / v2);
    let value = variance * (y1 / v1 + y2 / v2);
    let weight_reg = v2 / (v1 + v2);
    let weight_rank = v1 / (v1 + v2);
    Ok(FusedEstimate {
        value,
        variance,
        weight_reg,
        weight_rank,
    })
}

pub fn fuse(reg: &RegressorEstimate, rank: &RankEstimate) -> Result<FusedEstimate> {
    check_variance(reg.variance, "regressor")?;
    check_variance(rank.variance, "rank")?;
    fuse_gaussian((reg.value, reg.variance), (rank.value, rank.variance))
}

/// Variance of the linear combination `w a + (1 - w) b` of independent estimates.
pub fn combination_variance(weight_reg: f64, reg_var: f64, rank_var: f64) -> f64 {
    weight_reg * weight_reg * reg_var + (1.0 - weight_reg) * (1.0 - weight_reg) * rank_var
}

/// Floors the rank variance at `c` times the regressor variance.
pub fn regularize_rank_variance(rank_var: f64, reg_var: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("regularization constant must be > 0, got {c}")));
    }
    Ok(rank_var.max(c * reg_var))
}

/// Largest rank variance that still guarantees `MAE_post <= alpha * MAE_reg`.
pub fn required_rank_variance(alpha: f64, reg_var: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    check_variance(reg_var, "regressor")?;
    let a2 = alpha * alpha;
    Ok(a2 * reg_var / (1.0 - a2))
}

/// Expected absolute error of a zero-mean Gaussian with standard deviation `sigma`.
pub fn mae_of_sigma(sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok((2.0 / PI).sqrt() * sigma)
}
