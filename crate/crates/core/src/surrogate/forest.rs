use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::tree::grow;
use super::{
    normalize, ImportanceReport, PerturbationDataset, SlopeTransform, Surrogate, SurrogateKind,
    TreeParams, TreeSurrogate,
};
use crate::error::{Error, Result};
use crate::operators::PerturbationPlan;
use crate::rng::{substream, substream_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Share of operators considered at each split, rounded up.
    pub feature_fraction: f64,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            feature_fraction: 1.0 / 3.0,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("forest needs at least one tree".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "feature fraction {} outside (0, 1]",
                self.feature_fraction
            )));
        }
        self.tree.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestSurrogate {
    pub operator_ids: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<TreeSurrogate>,
    pub tree_seeds: Vec<u64>,
}

/// Bagged CART trees. Tree `t` draws its bootstrap rows and per-split
/// feature subsets from its own seeded stream, so the result does not depend
/// on how trees are scheduled across threads.
pub fn fit_forest(ds: &PerturbationDataset, params: &ForestParams) -> Result<ForestSurrogate> {
    params.validate()?;
    let m = ds.len();
    let f = ds.n_features();
    if m == 0 {
        return Err(Error::InsufficientSamples {
            samples: 0,
            features: f,
        });
    }
    let k = ((params.feature_fraction * f as f64).ceil() as usize).clamp(1, f.max(1));
    let tree_seeds: Vec<u64> = (0..params.n_trees)
        .map(|t| substream_seed(params.seed, "forest", t as u64))
        .collect();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(params.seed, "forest", t as u64);
            let idx: Vec<usize> = if params.bootstrap {
                (0..m).map(|_| rng.random_range(0..m)).collect()
            } else {
                (0..m).collect()
            };
            let mut candidates = || -> Vec<usize> {
                if k >= f {
                    (0..f).collect()
                } else {
                    let mut pick = index::sample(&mut rng, f, k).into_vec();
                    pick.sort_unstable();
                    pick
                }
            };
            let root = grow(ds.phi(), ds.c(), &idx, 0, &params.tree, &mut candidates);
            TreeSurrogate {
                operator_ids: ds.operator_ids().to_vec(),
                params: params.tree.clone(),
                root,
            }
        })
        .collect();
    Ok(ForestSurrogate {
        operator_ids: ds.operator_ids().to_vec(),
        params: params.clone(),
        trees,
        tree_seeds,
    })
}

impl Surrogate for ForestSurrogate {
    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Forest
    }

    fn operator_ids(&self) -> &[String] {
        &self.operator_ids
    }

    fn predict(&self, plan: &PerturbationPlan) -> f64 {
        self.trees.iter().map(|t| t.predict(plan)).sum::<f64>() / self.trees.len() as f64
    }

    /// Mean of the per-tree normalized decreases over trees that split at all.
    fn importance(&self, _transform: SlopeTransform) -> ImportanceReport {
        let mut acc = vec![0.0; self.operator_ids.len()];
        for tree in &self.trees {
            let d = tree.decreases();
            if d.iter().sum::<f64>() > 0.0 {
                for (a, v) in acc.iter_mut().zip(normalize(&d)) {
                    *a += v;
                }
            }
        }
        ImportanceReport {
            operator_ids: self.operator_ids.clone(),
            values: normalize(&acc),
            surrogate: SurrogateKind::Forest,
            slope_transform: None,
        }
    }

    fn metadata(&self) -> serde_json::Value {
        json!({
            "kind": "rf",
            "n_trees": self.trees.len(),
            "bootstrap": self.params.bootstrap,
            "feature_fraction": self.params.feature_fraction,
            "max_depth": self.params.tree.max_depth,
            "min_leaf": self.params.tree.min_leaf,
            "seed": self.params.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::fit_cart;

    fn fixture() -> PerturbationDataset {
        let plans: Vec<PerturbationPlan> = (0..8usize)
            .map(|code| PerturbationPlan::from_bits((0..3).map(|i| code >> i & 1 == 1).collect()))
            .collect();
        let c = plans.iter().map(|p| if p.get(2) { 0.25 } else { 0.75 }).collect();
        let ids = (0..3).map(|i| format!("op{i}")).collect();
        PerturbationDataset::new(ids, plans, c, "A", "").unwrap()
    }

    fn small_tree() -> TreeParams {
        TreeParams {
            max_depth: 6,
            min_leaf: 1,
        }
    }

    #[test]
    fn reduces_to_cart() {
        let ds = fixture();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            feature_fraction: 1.0,
            tree: small_tree(),
            seed: 7,
        };
        let forest = fit_forest(&ds, &params).unwrap();
        let tree = fit_cart(&ds, &small_tree()).unwrap();
        assert_eq!(forest.trees[0], tree);
        assert_eq!(
            forest.importance(SlopeTransform::Absolute).values,
            tree.importance(SlopeTransform::Absolute).values
        );
    }

    #[test]
    fn single_feature_dominates() {
        let ds = fixture();
        let params = ForestParams {
            tree: small_tree(),
            seed: 3,
            ..ForestParams::default()
        };
        let imp = fit_forest(&ds, &params).unwrap().importance(SlopeTransform::Absolute);
        assert_eq!(imp.ranked()[0], 2);
        assert!((imp.sum() - 1.0).abs() <= 1e-9);
        let again = fit_forest(&ds, &params).unwrap().importance(SlopeTransform::Absolute);
        assert_eq!(imp, again);
    }

    #[test]
    fn rejects_bad_params() {
        let ds = fixture();
        for params in [
            ForestParams {
                n_trees: 0,
                ..ForestParams::default()
            },
            ForestParams {
                feature_fraction: 0.0,
                ..ForestParams::default()
            },
        ] {
            assert!(fit_forest(&ds, &params).is_err());
        }
    }
}
