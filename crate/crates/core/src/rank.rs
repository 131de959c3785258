//! Rank-based property estimate from pairwise outcomes.
//!
//! The query's latent value `y` is scored with the Bradley–Terry likelihood in
//! raw label units: a reference with label `l` ranked below the query
//! contributes `-log s(y - l)`, one ranked above contributes
//! `-log(1 - s(y - l))`, where `s` is the logistic sigmoid. The negative
//! log-likelihood is convex in `y`, so its minimizer is the unique root of a
//! nondecreasing derivative, found here by bracketed Newton iteration. The
//! estimate's variance is the inverse of the observed Fisher information
//! `sum_i s(d_i) (1 - s(d_i))` with `d_i = y - l_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ComparisonSet;

/// Fisher information below this value is treated as underflow.
pub const FISHER_UNDERFLOW: f64 = 1e-300;

/// Logistic sigmoid, evaluated without overflow for any finite input.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)`, i.e. `-log s(-z)`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `s(z) (1 - s(z))`, the Bernoulli variance of a Bradley–Terry outcome.
pub fn logistic_variance(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the absolute NLL derivative.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Multiplies the reference-label range to pad the search interval.
    pub domain_margin_factor: f64,
    /// Variance reported when the Fisher information underflows.
    pub variance_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-8,
            max_iterations: 200,
            domain_margin_factor: 1.0,
            variance_cap: 1e12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.domain_margin_factor >= 0.0 && self.domain_margin_factor.is_finite()) {
            return Err(Error::invalid(format!(
                "domain margin factor must be >= 0, got {}",
                self.domain_margin_factor
            )));
        }
        if !(self.variance_cap > 0.0 && self.variance_cap.is_finite()) {
            return Err(Error::invalid("variance cap must be positive and finite"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub value: f64,
    pub variance: f64,
    /// The minimizer sits on the boundary of the search interval.
    pub clamped: bool,
    /// The Fisher information underflowed and `variance` is the configured cap.
    pub saturated: bool,
    pub nll_at_solution: f64,
    pub iterations: usize,
}

fn require_non_empty(comparisons: &ComparisonSet) -> Result<()> {
    if comparisons.is_empty() {
        Err(Error::Empty("comparison set"))
    } else {
        Ok(())
    }
}

/// Bradley–Terry negative log-likelihood of `candidate` as the query value.
pub fn bt_nll(candidate: f64, comparisons: &ComparisonSet) -> Result<f64> {
    require_non_empty(comparisons)?;
    Ok(nll_unchecked(candidate, comparisons))
}

fn nll_unchecked(y: f64, set: &ComparisonSet) -> f64 {
    let below: f64 = set.below().iter().map(|&l| softplus(l - y)).sum();
    let above: f64 = set.above().iter().map(|&l| softplus(y - l)).sum();
    below + above
}

/// First derivative of [`bt_nll`] with respect to the candidate.
pub fn bt_nll_derivative(candidate: f64, comparisons: &ComparisonSet) -> Result<f64> {
    require_non_empty(comparisons)?;
    Ok(derivative_unchecked(candidate, comparisons))
}

fn derivative_unchecked(y: f64, set: &ComparisonSet) -> f64 {
    let below: f64 = set.below().iter().map(|&l| sigmoid(l - y)).sum();
    let above: f64 = set.above().iter().map(|&l| sigmoid(y - l)).sum();
    above - below
}

/// Observed Fisher information at `solution`; also the NLL's second derivative.
pub fn fisher_information(solution: f64, comparisons: &ComparisonSet) -> Result<f64> {
    require_non_empty(comparisons)?;
    Ok(comparisons.labels().map(|l| logistic_variance(solution - l)).sum())
}

/// Inverse observed Fisher information at `solution`, with the default cap.
pub fn fisher_variance(solution: f64, comparisons: &ComparisonSet) -> Result<f64> {
    fisher_variance_capped(solution, comparisons, SolverConfig::default().variance_cap).map(|(v, _)| v)
}

/// Like [`fisher_variance`]; returns `(cap, true)` when the information underflows.
pub fn fisher_variance_capped(solution: f64, comparisons: &ComparisonSet, cap: f64) -> Result<(f64, bool)> {
    let info = fisher_information(solution, comparisons)?;
    if info < FISHER_UNDERFLOW {
        Ok((cap, true))
    } else {
        Ok((1.0 / info, false))
    }
}

/// Closed search interval `[min - m R, max + m R]` with `R` the label range
/// (taken as 1 when all labels coincide).
pub fn search_domain(comparisons: &ComparisonSet, margin_factor: f64) -> Result<(f64, f64)> {
    require_non_empty(comparisons)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in comparisons.labels() {
        if !l.is_finite() {
            return Err(Error::NonFinite(format!("reference label {l}")));
        }
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let range = if hi > lo { hi - lo } else { 1.0 };
    Ok((lo - margin_factor * range, hi + margin_factor * range))
}

/// Minimizes the Bradley–Terry NLL over the bounded search interval.
///
/// One-sided sets have no finite minimizer; their solution lands on the
/// interval boundary with `clamped = true`.
pub fn solve_rank_estimate(comparisons: &ComparisonSet, config: &SolverConfig) -> Result<RankEstimate> {
    config.validate()?;
    let (mut lo, mut hi) = search_domain(comparisons, config.domain_margin_factor)?;
    let tol = config.tolerance;
    let set = comparisons;

    let finish = |value: f64, clamped: bool, iterations: usize| -> Result<RankEstimate> {
        let (variance, saturated) = fisher_variance_capped(value, set, config.variance_cap)?;
        Ok(RankEstimate {
            value,
            variance,
            clamped,
            saturated,
            nll_at_solution: nll_unchecked(value, set),
            iterations,
        })
    };

    let d_lo = derivative_unchecked(lo, set);
    if d_lo >= -tol {
        return finish(lo, d_lo > tol, 0);
    }
    let d_hi = derivative_unchecked(hi, set);
    if d_hi <= tol {
        return finish(hi, d_hi < -tol, 0);
    }

    // Invariant: derivative(lo) < 0 < derivative(hi).
    let mut x = 0.5 * (lo + hi);
    for iteration in 1..=config.max_iterations {
        let d = derivative_unchecked(x, set);
        if d.abs() <= tol {
            return finish(x, false, iteration);
        }
        if d > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let curvature = fisher_information(x, set)?;
        let newton = x - d / curvature;
        let next = if curvature > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= f64::EPSILON * x.abs().max(1.0) {
            // Bracket exhausted at floating-point resolution.
            return finish(x, false, iteration);
        }
        x = next;
    }
    Err(Error::Numeric(format!(
        "rank solver did not converge within {} iterations",
        config.max_iterations
    )))
}
