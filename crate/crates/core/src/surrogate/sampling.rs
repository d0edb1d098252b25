use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::PerturbationPlan;
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Number of distinct plans; must exceed the operator count.
    pub m: usize,
    pub include_empty_plan: bool,
    pub seed: u64,
    pub inclusion_prob: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            m: 256,
            include_empty_plan: true,
            seed: 0,
            inclusion_prob: 0.5,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self, n_ops: usize) -> Result<()> {
        if n_ops == 0 {
            return Err(Error::InvalidParameter("no operators to sample".into()));
        }
        if self.m <= n_ops {
            return Err(Error::InvalidParameter(format!(
                "m = {} must exceed the operator count {n_ops}",
                self.m
            )));
        }
        if !(self.inclusion_prob > 0.0 && self.inclusion_prob < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inclusion probability {} outside (0, 1)",
                self.inclusion_prob
            )));
        }
        if let Some(universe) = universe_size(n_ops) {
            if self.m > universe {
                return Err(Error::InvalidParameter(format!(
                    "m = {} exceeds the {universe} distinct plans over {n_ops} operators",
                    self.m
                )));
            }
        }
        Ok(())
    }
}

fn universe_size(n_ops: usize) -> Option<usize> {
    u32::try_from(n_ops).ok().and_then(|n| 1usize.checked_shl(n))
}

fn plan_from_code(code: usize, n_ops: usize) -> PerturbationPlan {
    PerturbationPlan::from_bits((0..n_ops).map(|i| code >> i & 1 == 1).collect())
}

/// Draw `m` distinct plans, each operator included independently with
/// `inclusion_prob`. Duplicates are redrawn; once rejection becomes hopeless
/// (after `64 * 2^|F|` draws) the remaining plans come from a seeded shuffle
/// of the unseen universe. The empty plan comes first when requested.
/// Operators never drawn are switched on in a random non-empty row, which
/// keeps rows distinct.
pub fn sample_plans(cfg: &SamplingConfig, n_ops: usize) -> Result<Vec<PerturbationPlan>> {
    cfg.validate(n_ops)?;
    let mut rng = substream(cfg.seed, "sampling", 0);
    let mut seen: HashSet<PerturbationPlan> = HashSet::with_capacity(cfg.m);
    let mut plans = Vec::with_capacity(cfg.m);
    if cfg.include_empty_plan {
        let empty = PerturbationPlan::empty(n_ops);
        seen.insert(empty.clone());
        plans.push(empty);
    }
    let budget = universe_size(n_ops).map(|u| u.saturating_mul(64));
    let mut draws = 0usize;
    while plans.len() < cfg.m {
        if budget.is_some_and(|b| draws >= b) {
            let universe = universe_size(n_ops).expect("budget implies a finite universe");
            let mut rest: Vec<PerturbationPlan> = (0..universe)
                .map(|c| plan_from_code(c, n_ops))
                .filter(|p| !seen.contains(p))
                .collect();
            rest.shuffle(&mut rng);
            let need = cfg.m - plans.len();
            plans.extend(rest.into_iter().take(need));
            break;
        }
        draws += 1;
        let plan = PerturbationPlan::from_bits(
            (0..n_ops).map(|_| rng.random_bool(cfg.inclusion_prob)).collect(),
        );
        if seen.insert(plan.clone()) {
            plans.push(plan);
        }
    }

    let first = usize::from(cfg.include_empty_plan);
    for op in 0..n_ops {
        if plans.iter().any(|p| p.get(op)) {
            continue;
        }
        // every row lacks `op`, so switching it on cannot create a duplicate
        let row = rng.random_range(first..plans.len());
        plans[row].set(op, true);
    }
    Ok(plans)
}
