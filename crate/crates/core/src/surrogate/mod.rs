//! Surrogate models fitted on (plan, confidence) samples.
//!
//! A dataset pairs sampled [`PerturbationPlan`]s with the scorer's confidence
//! in a target class. Three interpretable models can be fitted on it, chosen
//! by name at runtime through [`fitter`]:
//!
//! | name | model |
//! |------|-------|
//! | `lr` | ordinary least squares with intercept |
//! | `dt` | CART regression tree |
//! | `rf` | random forest of CART trees |
//!
//! Every model yields an [`ImportanceReport`]: a probability vector over the
//! operators.

mod dataset;
mod forest;
mod linear;
mod sampling;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{build_dataset, BuildOptions, BuildOutcome, PerturbationDataset};
pub use forest::{fit_forest, ForestParams, ForestSurrogate};
pub use linear::{fit_linear, LinearSurrogate, RIDGE_LAMBDA};
pub use sampling::{sample_plans, SamplingConfig};
pub use tree::{fit_cart, TreeNode, TreeParams, TreeSurrogate};

use crate::error::{Error, Result};
use crate::operators::PerturbationPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateKind {
    #[serde(rename = "lr")]
    Linear,
    #[serde(rename = "dt")]
    Tree,
    #[serde(rename = "rf")]
    Forest,
}

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::Linear => "lr",
            SurrogateKind::Tree => "dt",
            SurrogateKind::Forest => "rf",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How linear slopes are mapped before the softmax.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeTransform {
    Identity,
    Negate,
    #[default]
    Absolute,
}

impl SlopeTransform {
    pub const ALL: [SlopeTransform; 3] = [
        SlopeTransform::Identity,
        SlopeTransform::Negate,
        SlopeTransform::Absolute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SlopeTransform::Identity => "identity",
            SlopeTransform::Negate => "negate",
            SlopeTransform::Absolute => "absolute",
        }
    }

    pub fn apply(self, slope: f64) -> f64 {
        match self {
            SlopeTransform::Identity => slope,
            SlopeTransform::Negate => -slope,
            SlopeTransform::Absolute => slope.abs(),
        }
    }
}

impl fmt::Display for SlopeTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SlopeTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "slope transform",
                name: s.to_string(),
                valid: "identity, negate, absolute".into(),
            })
    }
}

/// Per-operator importance; non-negative and summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub operator_ids: Vec<String>,
    pub values: Vec<f64>,
    pub surrogate: SurrogateKind,
    /// Only set for linear surrogates; trees report impurity decrease as is.
    pub slope_transform: Option<SlopeTransform>,
}

impl ImportanceReport {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.operator_ids
            .iter()
            .position(|o| o == id)
            .map(|i| self.values[i])
    }

    /// Operator indices by decreasing importance; ties keep registry order.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Scale non-negative weights onto the simplex; all-zero becomes uniform.
pub(crate) fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    }
}

pub trait Surrogate: Send + Sync + fmt::Debug {
    fn kind(&self) -> SurrogateKind;

    fn operator_ids(&self) -> &[String];

    fn predict(&self, plan: &PerturbationPlan) -> f64;

    fn importance(&self, transform: SlopeTransform) -> ImportanceReport;

    /// Model summary for reports.
    fn metadata(&self) -> serde_json::Value;

    fn as_linear(&self) -> Option<&LinearSurrogate> {
        None
    }

    fn as_tree(&self) -> Option<&TreeSurrogate> {
        None
    }
}

pub fn importance(surrogate: &dyn Surrogate, transform: SlopeTransform) -> ImportanceReport {
    surrogate.importance(transform)
}

/// Hyper-parameters for every surrogate kind.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub tree: TreeParams,
    pub forest: ForestParams,
}

pub trait SurrogateFitter: Send + Sync {
    fn kind(&self) -> SurrogateKind;

    fn fit(&self, ds: &PerturbationDataset) -> Result<Box<dyn Surrogate>>;
}

struct LinearFitter;

impl SurrogateFitter for LinearFitter {
    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Linear
    }

    fn fit(&self, ds: &PerturbationDataset) -> Result<Box<dyn Surrogate>> {
        Ok(Box::new(fit_linear(ds)?))
    }
}

struct TreeFitter(TreeParams);

impl SurrogateFitter for TreeFitter {
    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Tree
    }

    fn fit(&self, ds: &PerturbationDataset) -> Result<Box<dyn Surrogate>> {
        Ok(Box::new(fit_cart(ds, &self.0)?))
    }
}

struct ForestFitter(ForestParams);

impl SurrogateFitter for ForestFitter {
    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Forest
    }

    fn fit(&self, ds: &PerturbationDataset) -> Result<Box<dyn Surrogate>> {
        Ok(Box::new(fit_forest(ds, &self.0)?))
    }
}

type FitterCtor = fn(&SurrogateConfig) -> Box<dyn SurrogateFitter>;

/// Registered surrogate strategies, by name.
pub const SURROGATES: &[(&str, FitterCtor)] = &[
    ("lr", |_| Box::new(LinearFitter)),
    ("dt", |cfg| Box::new(TreeFitter(cfg.tree.clone()))),
    ("rf", |cfg| Box::new(ForestFitter(cfg.forest.clone()))),
];

pub fn fitter(name: &str, cfg: &SurrogateConfig) -> Result<Box<dyn SurrogateFitter>> {
    SURROGATES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor(cfg))
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "surrogate",
            name: name.to_string(),
            valid: SURROGATES
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", "),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_constants_is_uniform() {
        let p = softmax(&[0.3; 4]);
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let p = softmax(&[1000.0, 0.0]);
        assert!(p[0] > 0.999 && p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn registry_lookup() {
        let cfg = SurrogateConfig::default();
        for (name, _) in SURROGATES {
            assert_eq!(fitter(name, &cfg).unwrap().kind().name(), *name);
        }
        let err = fitter("svm", &cfg).err().unwrap();
        assert!(err.to_string().contains("lr, dt, rf"), "{err}");
        assert_eq!("negate".parse::<SlopeTransform>().unwrap(), SlopeTransform::Negate);
        assert!("abs".parse::<SlopeTransform>().is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        let r = ImportanceReport {
            operator_ids: vec!["a".into(), "b".into(), "c".into()],
            values: vec![0.25, 0.5, 0.25],
            surrogate: SurrogateKind::Linear,
            slope_transform: Some(SlopeTransform::Absolute),
        };
        assert_eq!(r.ranked(), vec![1, 0, 2]);
        assert_eq!(r.get("c"), Some(0.25));
    }
}
