//! Random-forest base regressor.
//!
//! Each tree is a CART regressor grown on a bootstrap resample; the forest
//! predicts the mean of its trees and reports their sample variance as the
//! prediction variance.

mod error;
mod forest;
mod tree;

pub use error::{ForestError, Result};
pub use forest::{fit, ForestConfig, TrainedForest};
pub use tree::RegressionTree;
