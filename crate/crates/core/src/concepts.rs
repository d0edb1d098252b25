//! Inferred bark concepts, their ranking, and rank agreement.
//!
//! Operator importances map onto five human-level concepts:
//!
//! * smooth = max(FI(smooth_150), FI(smooth_300))
//! * vertical_stripped = mean(FI(rotate_-30), FI(rotate_+30))
//! * rugged = FI(groove_remove)
//! * plated = mean(FI(rotate_-30), FI(rotate_+30), FI(flip_h), FI(flip_v))
//! * furrow = mean(rugged, vertical_stripped)

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{PerturbationPlan, DEFAULT_OPERATOR_IDS};
use crate::surrogate::{ImportanceReport, TreeNode, TreeSurrogate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferredConcept {
    Rugged,
    Plated,
    Furrow,
    VerticalStripped,
    Smooth,
}

impl InferredConcept {
    /// Fixed order, also used to break exact ties.
    pub const ALL: [InferredConcept; 5] = [
        InferredConcept::Rugged,
        InferredConcept::Plated,
        InferredConcept::Furrow,
        InferredConcept::VerticalStripped,
        InferredConcept::Smooth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InferredConcept::Rugged => "rugged",
            InferredConcept::Plated => "plated",
            InferredConcept::Furrow => "furrow",
            InferredConcept::VerticalStripped => "vertical_stripped",
            InferredConcept::Smooth => "smooth",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for InferredConcept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InferredConcept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "concept",
                name: s.to_string(),
                valid: Self::ALL.map(|c| c.name()).join(", "),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptSignificance {
    pub rugged: f64,
    pub plated: f64,
    pub furrow: f64,
    pub vertical_stripped: f64,
    pub smooth: f64,
}

impl ConceptSignificance {
    pub fn get(&self, c: InferredConcept) -> f64 {
        match c {
            InferredConcept::Rugged => self.rugged,
            InferredConcept::Plated => self.plated,
            InferredConcept::Furrow => self.furrow,
            InferredConcept::VerticalStripped => self.vertical_stripped,
            InferredConcept::Smooth => self.smooth,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        InferredConcept::ALL.map(|c| self.get(c))
    }
}

fn mean2(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}

/// Requires a report over exactly the default twelve operators (any order).
/// Means are taken pairwise so that equal inputs give bit-equal outputs.
pub fn concept_significance(report: &ImportanceReport) -> Result<ConceptSignificance> {
    let mut ids: Vec<&str> = report.operator_ids.iter().map(String::as_str).collect();
    ids.sort_unstable();
    let mut expected = DEFAULT_OPERATOR_IDS.to_vec();
    expected.sort_unstable();
    if ids != expected || report.values.len() != report.operator_ids.len() {
        return Err(Error::RegistryMismatch(format!(
            "concept mapping needs the default operators ({}), report has {}",
            DEFAULT_OPERATOR_IDS.join(", "),
            report.operator_ids.join(", ")
        )));
    }
    if let Some(v) = report.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite importance {v}")));
    }
    let fi = |id: &str| report.get(id).expect("checked above");
    let rot = mean2(fi("rotate_-30"), fi("rotate_+30"));
    let flips = mean2(fi("flip_h"), fi("flip_v"));
    let rugged = fi("groove_remove");
    Ok(ConceptSignificance {
        rugged,
        plated: mean2(rot, flips),
        furrow: mean2(rugged, rot),
        vertical_stripped: rot,
        smooth: fi("smooth_150").max(fi("smooth_300")),
    })
}

/// Concepts from most to least significant. Members of a tie group hold
/// exactly equal significance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptRanking {
    pub order: Vec<InferredConcept>,
    /// Groups of two or more tied concepts, each in ranking order.
    pub tie_groups: Vec<Vec<InferredConcept>>,
}

impl ConceptRanking {
    /// A strict ranking, e.g. a human annotation.
    pub fn from_order(order: Vec<InferredConcept>) -> Result<Self> {
        let mut sorted = order.clone();
        sorted.sort();
        if sorted != InferredConcept::ALL {
            return Err(Error::InvalidParameter(format!(
                "ranking must list each of the five concepts once, got [{}]",
                order.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(Self {
            order,
            tie_groups: Vec::new(),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.order.iter().map(|c| c.name()).collect()
    }

    /// Position of each concept, with tied concepts sharing the position of
    /// their group's first member.
    fn tied_positions(&self) -> [usize; 5] {
        let mut pos = [0usize; 5];
        for (i, c) in self.order.iter().enumerate() {
            pos[c.index()] = i;
        }
        for group in &self.tie_groups {
            let p = group.iter().map(|c| pos[c.index()]).min().unwrap_or(0);
            for c in group {
                pos[c.index()] = p;
            }
        }
        pos
    }
}

pub fn rank_concepts(sig: &ConceptSignificance) -> ConceptRanking {
    let mut order = InferredConcept::ALL.to_vec();
    // stable sort keeps the fixed order among exact ties
    order.sort_by(|&a, &b| sig.get(b).total_cmp(&sig.get(a)));
    let mut tie_groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && sig.get(order[end]) == sig.get(order[start]) {
            end += 1;
        }
        if end - start > 1 {
            tie_groups.push(order[start..end].to_vec());
        }
        start = end;
    }
    ConceptRanking { order, tie_groups }
}

/// Kendall's tau-b over the five concepts, using the recorded tie groups.
/// Defined as 0 when either ranking is one complete tie.
pub fn kendall_tau(a: &ConceptRanking, b: &ConceptRanking) -> f64 {
    let pa = a.tied_positions();
    let pb = b.tied_positions();
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..5 {
        for j in i + 1..5 {
            let da = (pa[i] as i64 - pa[j] as i64).signum();
            let db = (pb[i] as i64 - pb[j] as i64).signum();
            if da == 0 {
                ties_a += 1;
            }
            if db == 0 {
                ties_b += 1;
            }
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let pairs = 10i64;
    let denom = (((pairs - ties_a) * (pairs - ties_b)) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (concordant - discordant) as f64 / denom
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Operator not applied.
    Left,
    /// Operator applied.
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub operator: usize,
    pub operator_id: String,
    pub branch: Branch,
    /// Rows reaching the node.
    pub count: usize,
    pub mean_confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub steps: Vec<PathStep>,
    pub leaf_confidence: f64,
    pub leaf_count: usize,
}

/// Root-to-leaf walk. With a plan, each split follows the plan's bit; without
/// one it follows the child holding more rows, the left child on a tie.
pub fn tree_reasoning_path(tree: &TreeSurrogate, plan: Option<&PerturbationPlan>) -> ReasoningPath {
    let mut steps = Vec::new();
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Leaf { mean, count } => {
                return ReasoningPath {
                    steps,
                    leaf_confidence: *mean,
                    leaf_count: *count,
                }
            }
            TreeNode::Split {
                operator,
                mean,
                count,
                left,
                right,
                ..
            } => {
                let go_right = match plan {
                    Some(p) => p.get(*operator),
                    None => right.count() > left.count(),
                };
                steps.push(PathStep {
                    operator: *operator,
                    operator_id: tree.operator_ids[*operator].clone(),
                    branch: if go_right { Branch::Right } else { Branch::Left },
                    count: *count,
                    mean_confidence: *mean,
                });
                node = if go_right { right } else { left };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{fit_cart, PerturbationDataset, SurrogateKind, TreeParams};
    use proptest::prelude::*;
    use InferredConcept::*;

    fn report(values: Vec<f64>) -> ImportanceReport {
        ImportanceReport {
            operator_ids: DEFAULT_OPERATOR_IDS.iter().map(|s| s.to_string()).collect(),
            values,
            surrogate: SurrogateKind::Linear,
            slope_transform: None,
        }
    }

    fn with(overrides: &[(&str, f64)], rest: f64) -> ImportanceReport {
        report(
            DEFAULT_OPERATOR_IDS
                .iter()
                .map(|id| {
                    overrides
                        .iter()
                        .find(|(k, _)| k == id)
                        .map_or(rest, |(_, v)| *v)
                })
                .collect(),
        )
    }

    #[test]
    fn uniform_report() {
        let sig = concept_significance(&report(vec![1.0 / 12.0; 12])).unwrap();
        assert_eq!(sig.values(), [1.0 / 12.0; 5]);
        let r = rank_concepts(&sig);
        assert_eq!(r.order, InferredConcept::ALL.to_vec());
        assert_eq!(r.tie_groups, vec![InferredConcept::ALL.to_vec()]);
    }

    #[test]
    fn dominant_groove_removal() {
        let sig = concept_significance(&with(&[("groove_remove", 0.5)], 0.5 / 11.0)).unwrap();
        assert_eq!(sig.rugged, 0.5);
        for c in [Plated, Furrow, VerticalStripped, Smooth] {
            assert!(sig.rugged > sig.get(c));
        }
        assert_eq!(rank_concepts(&sig).order[0], Rugged);
    }

    #[test]
    fn smooth_takes_the_max() {
        let sig = concept_significance(&with(&[("smooth_150", 0.2), ("smooth_300", 0.1)], 0.07)).unwrap();
        assert_eq!(sig.smooth, 0.2);
    }

    #[test]
    fn formulas() {
        let values: Vec<f64> = (1..=12).map(|v| v as f64 / 78.0).collect();
        let r = report(values);
        let fi = |id: &str| r.get(id).unwrap();
        let sig = concept_significance(&r).unwrap();
        let vs = (fi("rotate_-30") + fi("rotate_+30")) / 2.0;
        assert!((sig.vertical_stripped - vs).abs() < 1e-15);
        let plated = (fi("rotate_-30") + fi("rotate_+30") + fi("flip_h") + fi("flip_v")) / 4.0;
        assert!((sig.plated - plated).abs() < 1e-15);
        assert!((sig.furrow - (fi("groove_remove") + vs) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn registry_mismatch() {
        let mut r = report(vec![1.0 / 12.0; 12]);
        r.operator_ids[0] = "tune_7".into();
        assert!(matches!(concept_significance(&r), Err(Error::RegistryMismatch(_))));
        let short = ImportanceReport {
            operator_ids: vec!["tune_5".into()],
            values: vec![1.0],
            ..report(vec![])
        };
        assert!(concept_significance(&short).is_err());
    }

    #[test]
    fn strictly_decreasing_is_kept() {
        let sig = ConceptSignificance {
            rugged: 0.1,
            plated: 0.5,
            furrow: 0.2,
            vertical_stripped: 0.4,
            smooth: 0.3,
        };
        let r = rank_concepts(&sig);
        assert_eq!(r.order, vec![Plated, VerticalStripped, Smooth, Furrow, Rugged]);
        assert!(r.tie_groups.is_empty());
    }

    #[test]
    fn tau_examples() {
        let a = ConceptRanking::from_order(InferredConcept::ALL.to_vec()).unwrap();
        let mut rev = InferredConcept::ALL.to_vec();
        rev.reverse();
        let b = ConceptRanking::from_order(rev).unwrap();
        let c = ConceptRanking::from_order(vec![Rugged, Furrow, Plated, VerticalStripped, Smooth]).unwrap();
        assert_eq!(kendall_tau(&a, &a), 1.0);
        assert_eq!(kendall_tau(&a, &b), -1.0);
        assert_eq!(kendall_tau(&a, &c), 0.8);
        assert!(ConceptRanking::from_order(vec![Rugged, Rugged, Plated, Furrow, Smooth]).is_err());
    }

    #[test]
    fn tau_b_with_ties() {
        let gt = ConceptRanking::from_order(InferredConcept::ALL.to_vec()).unwrap();
        let all_tied = rank_concepts(&ConceptSignificance {
            rugged: 0.2,
            plated: 0.2,
            furrow: 0.2,
            vertical_stripped: 0.2,
            smooth: 0.2,
        });
        assert_eq!(kendall_tau(&gt, &all_tied), 0.0);
        // rugged and plated tied on top: 9 concordant, 1 tied pair
        let partial = rank_concepts(&ConceptSignificance {
            rugged: 0.4,
            plated: 0.4,
            furrow: 0.3,
            vertical_stripped: 0.2,
            smooth: 0.1,
        });
        assert_eq!(partial.tie_groups, vec![vec![Rugged, Plated]]);
        assert_eq!(kendall_tau(&gt, &partial), 9.0 / (10.0f64 * 9.0).sqrt());
    }

    fn tree_fixture() -> TreeSurrogate {
        let plans: Vec<PerturbationPlan> = (0..8usize)
            .map(|code| PerturbationPlan::from_bits((0..3).map(|i| code >> i & 1 == 1).collect()))
            .collect();
        let c = plans
            .iter()
            .map(|p| if p.get(2) { 0.25 } else { 0.75 })
            .collect();
        let ids = vec!["a".into(), "b".into(), "c".into()];
        let ds = PerturbationDataset::new(ids, plans, c, "A", "").unwrap();
        fit_cart(&ds, &TreeParams { max_depth: 6, min_leaf: 1 }).unwrap()
    }

    #[test]
    fn reasoning_paths() {
        let tree = tree_fixture();
        let plan = PerturbationPlan::from_bits(vec![false, false, true]);
        let path = tree_reasoning_path(&tree, Some(&plan));
        assert_eq!(path.steps.len(), 1);
        assert_eq!(path.steps[0].operator, 2);
        assert_eq!(path.steps[0].branch, Branch::Right);
        assert_eq!(path.leaf_confidence, 0.25);
        // balanced 4/4 split goes left
        let majority = tree_reasoning_path(&tree, None);
        assert_eq!(majority.steps[0].branch, Branch::Left);
        assert_eq!(majority.leaf_confidence, 0.75);

        let leaf = TreeSurrogate {
            root: TreeNode::Leaf { mean: 0.5, count: 8 },
            ..tree
        };
        let path = tree_reasoning_path(&leaf, None);
        assert!(path.steps.is_empty());
        assert_eq!(path.leaf_confidence, 0.5);
    }

    proptest! {
        #[test]
        fn significance_is_scale_equivariant(
            raw in proptest::collection::vec(0.001f64..1.0, 12),
            alpha in 0.1f64..10.0,
        ) {
            let total: f64 = raw.iter().sum();
            let base = report(raw.iter().map(|v| v / total).collect());
            let scaled = report(base.values.iter().map(|v| v * alpha).collect());
            let a = concept_significance(&base).unwrap();
            let b = concept_significance(&scaled).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x * alpha - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
            prop_assert_eq!(rank_concepts(&a).order, rank_concepts(&b).order);
        }
    }
}
