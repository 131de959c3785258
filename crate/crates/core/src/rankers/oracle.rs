use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{RankItem, Ranker};
use crate::error::{Error, Result};
use crate::model::{ComparisonOutcome, LabeledReference};
use crate::seeding::Substream;

/// How a simulated ranker decides which pairs to get wrong.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum ErrorMode {
    /// Each pair is flipped independently with probability `1 - accuracy`.
    #[default]
    Uniform,
    /// Errors concentrate on close pairs: a pair whose labels differ by `d`
    /// is correct with probability `0.5 + (accuracy - 0.5) * (1 - exp(-d / scale))`.
    /// The realised accuracy is therefore below the configured one.
    MagnitudeDependent { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRankerConfig {
    pub accuracy: f64,
    pub seed: u64,
    #[serde(default)]
    pub error_mode: ErrorMode,
}

impl OracleRankerConfig {
    pub fn new(accuracy: f64, seed: u64) -> Result<Self> {
        let cfg = OracleRankerConfig {
            accuracy,
            seed,
            error_mode: ErrorMode::Uniform,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.accuracy) {
            return Err(Error::invalid(format!(
                "oracle accuracy must lie in [0.5, 1.0], got {}",
                self.accuracy
            )));
        }
        if let ErrorMode::MagnitudeDependent { scale } = self.error_mode {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::invalid("magnitude error scale must be positive"));
            }
        }
        Ok(())
    }
}

/// Simulated ranker that knows the ground truth and errs at a set rate.
///
/// Each decision draws from a stream keyed by `(seed, query id, pair index)`,
/// so outcomes are reproducible and independent of evaluation order.
#[derive(Debug, Clone)]
pub struct OracleRanker {
    config: OracleRankerConfig,
}

impl OracleRanker {
    pub fn new(config: OracleRankerConfig) -> Self {
        OracleRanker { config }
    }

    pub fn config(&self) -> &OracleRankerConfig {
        &self.config
    }

    fn p_correct(&self, gap: f64) -> f64 {
        let acc = self.config.accuracy;
        match self.config.error_mode {
            ErrorMode::Uniform => acc,
            ErrorMode::MagnitudeDependent { scale } => 0.5 + (acc - 0.5) * (1.0 - (-gap / scale).exp()),
        }
    }

    /// Ground-truth direction with probability `accuracy`, flipped otherwise.
    pub fn oracle_compare(
        &self,
        query_id: &str,
        y_query: f64,
        reference: &LabeledReference,
        pair_index: usize,
    ) -> Result<ComparisonOutcome> {
        if y_query == reference.label {
            return Err(Error::Tie {
                query: query_id.to_string(),
                reference: reference.id.clone(),
            });
        }
        let truth = y_query > reference.label;
        let u: f64 = Substream::new(self.config.seed, "oracle")
            .with_str(query_id)
            .with_index(pair_index as u64)
            .rng()
            .random();
        let correct = u < self.p_correct((y_query - reference.label).abs());
        Ok(ComparisonOutcome::new(query_id, &*reference.id, truth == correct))
    }
}

impl Ranker for OracleRanker {
    fn compare(&self, query: &RankItem<'_>, reference: &LabeledReference, pair_index: usize) -> Result<Option<bool>> {
        let y = query
            .label
            .ok_or_else(|| Error::invalid(format!("oracle ranker needs the true label of `{}`", query.id)))?;
        self.oracle_compare(query.id, y, reference, pair_index)
            .map(|o| Some(o.query_above))
    }
}
