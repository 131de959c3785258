//! CART regression tree grown greedily on squared error.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub(crate) enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl RegressionTree {
    #[cfg(test)]
    pub(crate) fn constant(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Grows a tree on the rows listed in `samples` (repeats allowed, as in a
    /// bootstrap draw).
    pub(crate) fn fit<R: Rng + ?Sized>(
        x: &[Vec<f64>],
        y: &[f64],
        samples: Vec<usize>,
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let dim = x.first().map_or(0, Vec::len);
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        while let Some((slot, idx, depth)) = stack.pop() {
            let n = idx.len();
            let sum: f64 = idx.iter().map(|&i| y[i]).sum();
            let mean = sum / n as f64;
            let pure = idx.iter().all(|&i| y[i] == y[idx[0]]);
            let stop = pure
                || n < params.min_samples_split
                || n < 2 * params.min_samples_leaf
                || params.max_depth.is_some_and(|d| depth >= d);
            let best = if stop {
                None
            } else {
                best_split(x, y, &idx, dim, params, rng)
            };
            match best {
                None => nodes[slot] = Node::Leaf { value: mean },
                Some(c) => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    stack.push((right, c.right, depth + 1));
                    stack.push((left, c.left, depth + 1));
                }
            }
        }
        RegressionTree { nodes }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if features[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn max_feature_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub(crate) fn is_well_formed(&self) -> bool {
        let n = self.nodes.len();
        n > 0
            && self.nodes.iter().enumerate().all(|(i, node)| match node {
                Node::Leaf { value } => value.is_finite(),
                Node::Split {
                    threshold, left, right, ..
                } => threshold.is_finite() && *left > i && *right > i && *left < n && *right < n,
            })
    }
}

/// Best split over the candidate features. Ties keep the first split found,
/// scanning features in index order and thresholds in increasing order.
fn best_split<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    dim: usize,
    params: &TreeParams,
    rng: &mut R,
) -> Option<Candidate> {
    let features: Vec<usize> = if params.features_per_split >= dim {
        (0..dim).collect()
    } else {
        let mut f = index::sample(rng, dim, params.features_per_split).into_vec();
        f.sort_unstable();
        f
    };
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let min_leaf = params.min_samples_leaf.max(1);
    let mut best: Option<(usize, usize, f64, f64, Vec<usize>)> = None;

    let mut order = idx.to_vec();
    for &f in &features {
        order.copy_from_slice(idx);
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            left_sum += y[order[pos]];
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let (lo, hi) = (x[order[pos]][f], x[order[pos + 1]][f]);
            if lo >= hi {
                continue;
            }
            // Maximizing this is minimizing the children's summed squared error.
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64;
            if best.as_ref().is_none_or(|b| score > b.2) {
                let mid = 0.5 * (lo + hi);
                let threshold = if mid < hi { mid } else { lo };
                best = Some((f, pos, score, threshold, order.clone()));
            }
        }
    }
    best.map(|(feature, pos, _, threshold, sorted)| Candidate {
        feature,
        threshold,
        left: sorted[..=pos].to_vec(),
        right: sorted[pos + 1..].to_vec(),
    })
}
