//! End-to-end explanation of one image: sample plans, score them, fit a
//! surrogate, and map its importances onto the inferred concepts.

use serde::{Deserialize, Serialize};

use crate::concepts::{
    concept_significance, rank_concepts, tree_reasoning_path, ConceptRanking, ConceptSignificance,
    ReasoningPath,
};
use crate::error::Result;
use crate::operators::{OperatorRegistry, PerturbationPlan};
use crate::raster::Raster;
use crate::scorer::Scorer;
use crate::segment::SegmentationParams;
use crate::surrogate::{
    build_dataset, fitter, sample_plans, BuildOptions, ImportanceReport, PerturbationDataset,
    SamplingConfig, SlopeTransform, Surrogate, SurrogateConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub sampling: SamplingConfig,
    /// Registered surrogate name: `lr`, `dt` or `rf`.
    pub surrogate: String,
    pub surrogate_params: SurrogateConfig,
    pub transform: SlopeTransform,
    pub seg_params: SegmentationParams,
    /// Concurrent scorer calls; 0 lets the thread pool decide.
    pub parallelism: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            sampling: SamplingConfig::default(),
            surrogate: "lr".into(),
            surrogate_params: SurrogateConfig::default(),
            transform: SlopeTransform::default(),
            seg_params: SegmentationParams::default(),
            parallelism: 0,
        }
    }
}

impl ExplainConfig {
    /// Same configuration driven by another seed. The seed feeds plan
    /// sampling and the forest's per-tree streams.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.sampling.seed = seed;
        cfg.surrogate_params.forest.seed = seed;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorImportance {
    pub operator: String,
    pub importance: f64,
}

/// Serializable result of [`explain`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub image_id: String,
    pub target_class: String,
    pub seed: u64,
    pub m: usize,
    pub surrogate: serde_json::Value,
    pub slope_transform: Option<SlopeTransform>,
    pub base_confidence: f64,
    pub importances: Vec<OperatorImportance>,
    /// `None` when the registry is not the default twelve operators.
    pub significance: Option<ConceptSignificance>,
    pub ranking: Option<ConceptRanking>,
    /// Majority path through the tree, for `dt`.
    pub reasoning_path: Option<ReasoningPath>,
    pub warnings: Vec<String>,
}

/// Everything produced along the way, for callers that need more than the
/// summary.
#[derive(Debug)]
pub struct ExplainRun {
    pub explanation: Explanation,
    pub dataset: PerturbationDataset,
    pub surrogate: Box<dyn Surrogate>,
    pub importance: ImportanceReport,
}

pub fn explain(
    img: &Raster,
    image_id: &str,
    registry: &OperatorRegistry,
    scorer: &dyn Scorer,
    target_class: &str,
    cfg: &ExplainConfig,
) -> Result<ExplainRun> {
    let fitter = fitter(&cfg.surrogate, &cfg.surrogate_params)?;
    let plans = sample_plans(&cfg.sampling, registry.len())?;
    let built = build_dataset(
        img,
        &plans,
        registry,
        scorer,
        target_class,
        &BuildOptions {
            seg_params: cfg.seg_params,
            parallelism: cfg.parallelism,
            image_id: image_id.to_string(),
        },
    )?;
    let dataset = built.dataset;
    let surrogate = fitter.fit(&dataset)?;
    let importance = surrogate.importance(cfg.transform);

    let (significance, ranking) = match concept_significance(&importance) {
        Ok(sig) => (Some(sig), Some(rank_concepts(&sig))),
        Err(_) => (None, None),
    };
    let empty = PerturbationPlan::empty(registry.len());
    let base_confidence = dataset
        .phi()
        .iter()
        .position(|p| *p == empty)
        .map(|i| dataset.c()[i])
        .unwrap_or_else(|| surrogate.predict(&empty));
    let reasoning_path = surrogate.as_tree().map(|t| tree_reasoning_path(t, None));

    let mut warnings: Vec<String> = built
        .warnings
        .iter()
        .map(|(i, w)| format!("plan {i} ({}): {}", w.operator, w.message))
        .collect();
    warnings.dedup();
    if let Some(lin) = surrogate.as_linear() {
        if lin.degenerate {
            warnings.push("design matrix rank deficient; ridge fallback used".into());
        }
    }

    let explanation = Explanation {
        image_id: image_id.to_string(),
        target_class: target_class.to_string(),
        seed: cfg.sampling.seed,
        m: dataset.len(),
        surrogate: surrogate.metadata(),
        slope_transform: importance.slope_transform,
        base_confidence,
        importances: importance
            .operator_ids
            .iter()
            .zip(&importance.values)
            .map(|(id, v)| OperatorImportance {
                operator: id.clone(),
                importance: *v,
            })
            .collect(),
        significance,
        ranking,
        reasoning_path,
        warnings,
    };
    Ok(ExplainRun {
        explanation,
        dataset,
        surrogate,
        importance,
    })
}
