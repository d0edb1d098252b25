//! Black-box classifier contract.
//!
//! Anything that turns a [`Raster`] into a probability vector implements
//! [`Scorer`]. Three analytic builtin scorers serve as ground-truth oracles;
//! external models are reached over a length-prefixed stdio protocol or HTTP.
//! Scorers are selected at runtime from a spec string, see [`ScorerSpec`].

mod builtin;
mod external;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use builtin::{
    builtin_names, mean_hue, GrooveContrastScorer, HueGateScorer, StripeOrientationScorer,
};
pub use external::{HttpScorer, StdioScorer};

use crate::error::{Error, Result};
use crate::raster::{resize_bilinear, Raster};

/// Tolerance on the probability sum.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    probs: Vec<f64>,
    labels: Vec<String>,
}

impl ProbVector {
    pub fn new(probs: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbs("empty probability vector".into()));
        }
        if probs.len() != labels.len() {
            return Err(Error::InvalidProbs(format!(
                "{} probabilities for {} labels",
                probs.len(),
                labels.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbs(format!("probability {p} outside [0,1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidProbs(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs, labels })
    }

    /// Two-class vector `[p, 1-p]`.
    pub fn binary(p: f64, labels: &[&str; 2]) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self {
            probs: vec![p, 1.0 - p],
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn prob_of(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probs[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Builtin,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerDescriptor {
    pub kind: ScorerKind,
    pub name: String,
    /// Size images are resized to before scoring. `None` passes images
    /// through untouched and leaves preprocessing to the model.
    pub input_size: Option<(u32, u32)>,
    /// Empty when the labels are only known from replies.
    pub class_labels: Vec<String>,
}

pub trait Scorer: Send + Sync {
    fn descriptor(&self) -> ScorerDescriptor;

    /// Score an image already at the descriptor's input size.
    fn predict(&self, img: &Raster) -> Result<ProbVector>;
}

/// Resize to the scorer's input size when it has one, then predict.
pub fn score(scorer: &dyn Scorer, img: &Raster) -> Result<ProbVector> {
    let desc = scorer.descriptor();
    match desc.input_size {
        Some((w, h)) if img.dims() != (w, h) => scorer.predict(&resize_bilinear(img, w, h)?),
        _ => scorer.predict(img),
    }
}

#[inline]
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parsed `--scorer` value.
///
/// * `builtin:<name>[:k=v,k=v]`
/// * `exec:<shell command>`
/// * `http:<url>` (requests go to `<url>/score` unless the url already ends
///   in `/score`)
#[derive(Clone, Debug, PartialEq)]
pub enum ScorerSpec {
    Builtin {
        name: String,
        params: BTreeMap<String, f64>,
    },
    Exec(String),
    Http(String),
}

impl FromStr for ScorerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameter(format!("scorer spec `{s}`: {msg}"));
        let (scheme, rest) = s
            .split_once(':')
            .ok_or_else(|| bad("expected builtin:, exec: or http:"))?;
        match scheme {
            "builtin" => {
                let (name, params) = rest.split_once(':').unwrap_or((rest, ""));
                let mut map = BTreeMap::new();
                for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| bad(&format!("`{v}` is not a number")))?;
                    map.insert(k.trim().to_string(), v);
                }
                Ok(ScorerSpec::Builtin {
                    name: name.to_string(),
                    params: map,
                })
            }
            "exec" if !rest.trim().is_empty() => Ok(ScorerSpec::Exec(rest.to_string())),
            "http" if !rest.trim().is_empty() => Ok(ScorerSpec::Http(rest.to_string())),
            _ => Err(bad("expected builtin:, exec: or http:")),
        }
    }
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Builtin { name, params } => {
                write!(f, "builtin:{name}")?;
                if !params.is_empty() {
                    let kv: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    write!(f, ":{}", kv.join(","))?;
                }
                Ok(())
            }
            ScorerSpec::Exec(cmd) => write!(f, "exec:{cmd}"),
            ScorerSpec::Http(url) => write!(f, "http:{url}"),
        }
    }
}

impl ScorerSpec {
    pub fn build(&self) -> Result<Box<dyn Scorer>> {
        match self {
            ScorerSpec::Builtin { name, params } => builtin::build(name, params),
            ScorerSpec::Exec(cmd) => Ok(Box::new(StdioScorer::spawn(cmd, 1)?)),
            ScorerSpec::Http(url) => Ok(Box::new(HttpScorer::new(url))),
        }
    }
}
