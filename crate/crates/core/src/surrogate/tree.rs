use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{normalize, ImportanceReport, PerturbationDataset, SlopeTransform, Surrogate, SurrogateKind};
use crate::error::{Error, Result};
use crate::operators::PerturbationPlan;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_leaf: 5,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Left children hold the rows where the operator is off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        mean: f64,
        count: usize,
    },
    Split {
        operator: usize,
        /// Drop in summed squared error achieved by this split.
        sse_decrease: f64,
        mean: f64,
        count: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn mean(&self) -> f64 {
        match self {
            TreeNode::Leaf { mean, .. } | TreeNode::Split { mean, .. } => *mean,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            TreeNode::Leaf { count, .. } | TreeNode::Split { count, .. } => *count,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Leaf { .. } => vec![self],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }

    fn add_decreases(&self, acc: &mut [f64]) {
        if let TreeNode::Split {
            operator,
            sse_decrease,
            left,
            right,
            ..
        } = self
        {
            acc[*operator] += sse_decrease;
            left.add_decreases(acc);
            right.add_decreases(acc);
        }
    }

    fn predict(&self, plan: &PerturbationPlan) -> f64 {
        match self {
            TreeNode::Leaf { mean, .. } => *mean,
            TreeNode::Split {
                operator,
                left,
                right,
                ..
            } => {
                if plan.get(*operator) {
                    right.predict(plan)
                } else {
                    left.predict(plan)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSurrogate {
    pub operator_ids: Vec<String>,
    pub params: TreeParams,
    pub root: TreeNode,
}

impl TreeSurrogate {
    /// Total squared-error decrease credited to each operator.
    pub fn decreases(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.operator_ids.len()];
        self.root.add_decreases(&mut acc);
        acc
    }
}

pub(crate) fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

pub(crate) fn sse(y: &[f64], idx: &[usize]) -> f64 {
    let m = mean(y, idx);
    idx.iter().map(|&i| (y[i] - m).powi(2)).sum()
}

/// Greedy variance-reduction growth over row indices `idx` (which may repeat,
/// as in bootstrap samples). `candidates` yields the features to consider at
/// each split, ascending.
pub(crate) fn grow(
    phi: &[PerturbationPlan],
    y: &[f64],
    idx: &[usize],
    depth: usize,
    params: &TreeParams,
    candidates: &mut dyn FnMut() -> Vec<usize>,
) -> TreeNode {
    let n = idx.len();
    let node_mean = mean(y, idx);
    let first = y[idx[0]];
    let constant = idx.iter().all(|&i| y[i] == first);
    if depth >= params.max_depth || n < 2 * params.min_leaf || constant {
        return TreeNode::Leaf {
            mean: node_mean,
            count: n,
        };
    }
    let parent = sse(y, idx);
    // decreases within this margin count as ties, resolved toward the lower index
    let tol = 1e-12 * parent.max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>)> = None;
    for f in candidates() {
        let (right, left): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| phi[i].get(f));
        if left.len() < params.min_leaf || right.len() < params.min_leaf {
            continue;
        }
        let decrease = parent - sse(y, &left) - sse(y, &right);
        if best.as_ref().is_none_or(|b| decrease > b.0 + tol) {
            best = Some((decrease, f, left, right));
        }
    }
    match best {
        None => TreeNode::Leaf {
            mean: node_mean,
            count: n,
        },
        Some((decrease, operator, left, right)) => TreeNode::Split {
            operator,
            sse_decrease: decrease.max(0.0),
            mean: node_mean,
            count: n,
            left: Box::new(grow(phi, y, &left, depth + 1, params, candidates)),
            right: Box::new(grow(phi, y, &right, depth + 1, params, candidates)),
        },
    }
}

/// CART regression tree on the binary plan features.
///
/// Each split maximizes the squared-error decrease over all operators; near
/// ties (relative 1e-12) go to the lowest operator index, and a best decrease
/// of zero still splits. Growth stops at `max_depth`, when a node has fewer
/// than `2 · min_leaf` rows, when no split leaves `min_leaf` rows on both
/// sides, or when all confidences in the node are equal.
pub fn fit_cart(ds: &PerturbationDataset, params: &TreeParams) -> Result<TreeSurrogate> {
    params.validate()?;
    if ds.is_empty() {
        return Err(Error::InsufficientSamples {
            samples: 0,
            features: ds.n_features(),
        });
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let all: Vec<usize> = (0..ds.n_features()).collect();
    let root = grow(ds.phi(), ds.c(), &idx, 0, params, &mut || all.clone());
    Ok(TreeSurrogate {
        operator_ids: ds.operator_ids().to_vec(),
        params: params.clone(),
        root,
    })
}

impl Surrogate for TreeSurrogate {
    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Tree
    }

    fn operator_ids(&self) -> &[String] {
        &self.operator_ids
    }

    fn predict(&self, plan: &PerturbationPlan) -> f64 {
        self.root.predict(plan)
    }

    /// Normalized total decrease; `transform` does not apply to trees.
    fn importance(&self, _transform: SlopeTransform) -> ImportanceReport {
        ImportanceReport {
            operator_ids: self.operator_ids.clone(),
            values: normalize(&self.decreases()),
            surrogate: SurrogateKind::Tree,
            slope_transform: None,
        }
    }

    fn metadata(&self) -> serde_json::Value {
        json!({
            "kind": "dt",
            "max_depth": self.params.max_depth,
            "min_leaf": self.params.min_leaf,
            "depth": self.root.depth(),
            "leaves": self.root.leaves().len(),
        })
    }

    fn as_tree(&self) -> Option<&TreeSurrogate> {
        Some(self)
    }
}
