use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rankrefine_core::{Dataset, RegressorEstimate, Substream};

use crate::error::{ForestError, Result};
use crate::tree::{RegressionTree, TreeParams};

const FORMAT_NAME: &str = "rankrefine-forest";
const FORMAT_VERSION: u32 = 1;

/// Forest hyper-parameters. Defaults follow the common random-forest
/// regressor defaults: 100 fully grown trees, every feature considered at
/// each split, bootstrap samples the size of the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// `None` considers every feature.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    /// Lower bound on the reported prediction variance.
    pub variance_floor: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
            variance_floor: 1e-9,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ForestError::InvalidConfig(m.to_string()));
        if self.n_trees < 2 {
            return bad("n_trees must be at least 2 for a spread-based variance");
        }
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return bad("min_samples_split must be >= 2 and min_samples_leaf >= 1");
        }
        if self.max_depth == Some(0) || self.features_per_split == Some(0) {
            return bad("max_depth and features_per_split must be positive");
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return bad("variance_floor must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    trees: Vec<RegressionTree>,
    dim: usize,
    variance_floor: f64,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    forest: TrainedForest,
}

/// Trains a bagged forest. Tree `t` draws its bootstrap sample and feature
/// subsets from its own substream of `config.seed`, so the result does not
/// depend on how trees are scheduled across threads.
pub fn fit(train: &Dataset, config: &ForestConfig) -> Result<TrainedForest> {
    config.validate()?;
    let n = train.len();
    if n < 2 {
        return Err(ForestError::Degenerate(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    let dim = train.dim();
    let x: Vec<Vec<f64>> = train.rows().iter().map(|r| r.features.clone()).collect();
    let y = train.targets();
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split: config.features_per_split.unwrap_or(dim).min(dim),
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = Substream::new(config.seed, "forest.tree").with_index(t as u64).rng();
            let samples: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            RegressionTree::fit(&x, &y, samples, &params, &mut rng)
        })
        .collect();
    Ok(TrainedForest {
        trees,
        dim,
        variance_floor: config.variance_floor,
    })
}

impl TrainedForest {
    #[cfg(test)]
    pub(crate) fn from_trees(trees: Vec<RegressionTree>, dim: usize, variance_floor: f64) -> Self {
        TrainedForest {
            trees,
            dim,
            variance_floor,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    fn check_dim(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.dim {
            return Err(ForestError::DimensionMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        Ok(())
    }

    pub fn tree_predictions(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(features)?;
        Ok(self.trees.iter().map(|t| t.predict(features)).collect())
    }

    /// Mean of the per-tree predictions, with their unbiased sample variance
    /// (floored) as the uncertainty.
    pub fn predict_with_variance(&self, features: &[f64]) -> Result<RegressorEstimate> {
        let preds = self.tree_predictions(features)?;
        let m = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / m;
        let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (m - 1.0);
        Ok(RegressorEstimate::new(mean, var.max(self.variance_floor))?)
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        self.predict_with_variance(features).map(|e| e.value)
    }

    pub fn to_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let envelope = Envelope {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            forest: self.clone(),
        };
        serde_json::to_writer(writer, &envelope)?;
        Ok(())
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let envelope: Envelope = serde_json::from_reader(reader)?;
        if envelope.format != FORMAT_NAME || envelope.version != FORMAT_VERSION {
            return Err(ForestError::Format(format!(
                "unsupported model file {} v{}",
                envelope.format, envelope.version
            )));
        }
        let forest = envelope.forest;
        let valid = forest.trees.len() >= 2
            && forest.variance_floor > 0.0
            && forest
                .trees
                .iter()
                .all(|t| t.is_well_formed() && t.max_feature_index().is_none_or(|f| f < forest.dim));
        if !valid {
            return Err(ForestError::Format("model file failed validation".into()));
        }
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_writer(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}
