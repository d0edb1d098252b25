use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{softmax, ImportanceReport, PerturbationDataset, SlopeTransform, Surrogate, SurrogateKind};
use crate::error::{Error, Result};
use crate::operators::PerturbationPlan;

/// Ridge penalty used when the design matrix is rank deficient.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Relative size below which an R diagonal entry counts as zero.
const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSurrogate {
    pub operator_ids: Vec<String>,
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// Set when the ridge fallback was used.
    pub degenerate: bool,
}

/// Least squares `c ≈ β₀ + Φβ` through Householder QR of the design matrix
/// with an intercept column. Rank-deficient designs are solved with a tiny
/// ridge penalty instead and flagged `degenerate`.
pub fn fit_linear(ds: &PerturbationDataset) -> Result<LinearSurrogate> {
    let m = ds.len();
    let f = ds.n_features();
    if m <= f {
        return Err(Error::InsufficientSamples {
            samples: m,
            features: f,
        });
    }
    let design = design_columns(ds);
    let (beta, degenerate) = match lstsq(design.clone(), ds.c().to_vec()) {
        Some(beta) => (beta, false),
        None => {
            let p = f + 1;
            let root = RIDGE_LAMBDA.sqrt();
            let augmented = design
                .into_iter()
                .enumerate()
                .map(|(j, mut col)| {
                    col.extend((0..p).map(|k| if k == j { root } else { 0.0 }));
                    col
                })
                .collect();
            let mut rhs = ds.c().to_vec();
            rhs.extend(std::iter::repeat_n(0.0, p));
            let beta = lstsq(augmented, rhs).expect("ridge-augmented design has full rank");
            (beta, true)
        }
    };
    Ok(LinearSurrogate {
        operator_ids: ds.operator_ids().to_vec(),
        intercept: beta[0],
        slopes: beta[1..].to_vec(),
        degenerate,
    })
}

/// Column-major `[1 | Φ]`.
fn design_columns(ds: &PerturbationDataset) -> Vec<Vec<f64>> {
    let mut cols = vec![vec![1.0; ds.len()]];
    for j in 0..ds.n_features() {
        cols.push(ds.phi().iter().map(|p| f64::from(u8::from(p.get(j)))).collect());
    }
    cols
}

/// Minimize `‖Ax − b‖` for column-major `a` (m × p, m ≥ p). Returns `None`
/// when `a` is numerically rank deficient.
fn lstsq(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let p = a.len();
    let m = b.len();
    debug_assert!(m >= p);
    let mut diag = vec![0.0; p];
    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv > 0.0 {
            let reflect = |col: &mut [f64]| {
                let s = 2.0 * v.iter().zip(col.iter()).map(|(x, y)| x * y).sum::<f64>() / vv;
                for (c, x) in col.iter_mut().zip(&v) {
                    *c -= s * x;
                }
            };
            for col in a.iter_mut().skip(k) {
                reflect(&mut col[k..]);
            }
            reflect(&mut b[k..]);
        }
        diag[k] = a[k][k];
    }
    let scale = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if scale == 0.0 || diag.iter().any(|d| d.abs() <= RANK_TOL * scale) {
        return None;
    }
    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let tail: f64 = (k + 1..p).map(|j| a[j][k] * x[j]).sum();
        x[k] = (b[k] - tail) / a[k][k];
    }
    Some(x)
}

impl LinearSurrogate {
    pub fn residuals(&self, ds: &PerturbationDataset) -> Vec<f64> {
        ds.phi()
            .iter()
            .zip(ds.c())
            .map(|(p, c)| self.predict(p) - c)
            .collect()
    }

    /// Euclidean norm of the squared-loss gradient `2·Xᵀ(Xβ − c)` at the fitted
    /// coefficients.
    pub fn gradient_norm(&self, ds: &PerturbationDataset) -> f64 {
        let r = self.residuals(ds);
        let mut g = vec![2.0 * r.iter().sum::<f64>()];
        for j in 0..ds.n_features() {
            g.push(
                2.0 * ds
                    .phi()
                    .iter()
                    .zip(&r)
                    .filter(|(p, _)| p.get(j))
                    .map(|(_, r)| r)
                    .sum::<f64>(),
            );
        }
        g.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// First-order optimality: gradient norm at most `1e-6 · m`.
    pub fn is_optimal(&self, ds: &PerturbationDataset) -> bool {
        self.gradient_norm(ds) <= 1e-6 * ds.len() as f64
    }
}

impl Surrogate for LinearSurrogate {
    fn kind(&self) -> SurrogateKind {
        SurrogateKind::Linear
    }

    fn operator_ids(&self) -> &[String] {
        &self.operator_ids
    }

    fn predict(&self, plan: &PerturbationPlan) -> f64 {
        self.intercept + plan.selected().map(|j| self.slopes[j]).sum::<f64>()
    }

    fn importance(&self, transform: SlopeTransform) -> ImportanceReport {
        let t: Vec<f64> = self.slopes.iter().map(|&s| transform.apply(s)).collect();
        ImportanceReport {
            operator_ids: self.operator_ids.clone(),
            values: softmax(&t),
            surrogate: SurrogateKind::Linear,
            slope_transform: Some(transform),
        }
    }

    fn metadata(&self) -> serde_json::Value {
        json!({
            "kind": "lr",
            "intercept": self.intercept,
            "slopes": self
                .operator_ids
                .iter()
                .zip(&self.slopes)
                .map(|(id, s)| (id.clone(), json!(s)))
                .collect::<serde_json::Map<_, _>>(),
            "degenerate": self.degenerate,
        })
    }

    fn as_linear(&self) -> Option<&LinearSurrogate> {
        Some(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("op{i}")).collect()
    }

    fn all_plans(n: usize) -> Vec<PerturbationPlan> {
        (0..1usize << n)
            .map(|code| PerturbationPlan::from_bits((0..n).map(|i| code >> i & 1 == 1).collect()))
            .collect()
    }

    /// Normal equations `XᵀX β = Xᵀc` by Gauss-Jordan elimination with
    /// partial pivoting.
    fn normal_equations(plans: &[PerturbationPlan], c: &[f64]) -> Vec<f64> {
        let p = plans[0].len() + 1;
        let row = |pl: &PerturbationPlan| -> Vec<f64> {
            std::iter::once(1.0)
                .chain(pl.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }))
                .collect()
        };
        let mut a = vec![vec![0.0; p + 1]; p];
        for (pl, &y) in plans.iter().zip(c) {
            let x = row(pl);
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += x[i] * x[j];
                }
                a[i][p] += x[i] * y;
            }
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for v in a[col].iter_mut() {
                *v /= d;
            }
            for i in 0..p {
                if i != col {
                    let f = a[i][col];
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[i].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        a.iter().map(|r| r[p]).collect()
    }

    #[test]
    fn exact_linear_data_is_recovered() {
        let plans = all_plans(4);
        let truth = [0.9, 0.0, -0.4, 0.0, 0.0];
        let c: Vec<f64> = plans
            .iter()
            .map(|p| truth[0] + p.selected().map(|j| truth[j + 1]).sum::<f64>())
            .collect();
        let ds = PerturbationDataset::new(ids(4), plans, c, "A", "").unwrap();
        let fit = fit_linear(&ds).unwrap();
        assert!(!fit.degenerate);
        assert!((fit.intercept - 0.9).abs() <= 1e-9);
        for (s, t) in fit.slopes.iter().zip(&truth[1..]) {
            assert!((s - t).abs() <= 1e-9, "{s} vs {t}");
        }
        assert!(fit.residuals(&ds).iter().all(|r| r.abs() <= 1e-9));
        assert!(fit.is_optimal(&ds));
    }

    #[test]
    fn constant_target() {
        let ds = PerturbationDataset::new(ids(3), all_plans(3), vec![0.7; 8], "A", "").unwrap();
        let fit = fit_linear(&ds).unwrap();
        assert!((fit.intercept - 0.7).abs() < 1e-12);
        assert!(fit.slopes.iter().all(|s| s.abs() < 1e-12));
        let r = fit.importance(SlopeTransform::Identity);
        assert!(r.values.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn noise_moves_slopes_little() {
        let plans = all_plans(4);
        let clean: Vec<f64> = plans
            .iter()
            .map(|p| 0.6 + if p.get(1) { -0.3 } else { 0.0 } + if p.get(3) { 0.1 } else { 0.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noisy: Vec<f64> = clean.iter().map(|c| c + rng.random_range(-1e-3..1e-3)).collect();
        let a = fit_linear(&PerturbationDataset::new(ids(4), plans.clone(), clean, "A", "").unwrap()).unwrap();
        let b = fit_linear(&PerturbationDataset::new(ids(4), plans, noisy, "A", "").unwrap()).unwrap();
        for (x, y) in a.slopes.iter().zip(&b.slopes) {
            assert!((x - y).abs() <= 1e-2);
        }
    }

    #[test]
    fn too_few_samples() {
        let plans = vec![
            PerturbationPlan::from_bits(vec![true, false]),
            PerturbationPlan::from_bits(vec![false, true]),
        ];
        let ds = PerturbationDataset::new(ids(2), plans, vec![0.1, 0.2], "A", "").unwrap();
        assert!(matches!(
            fit_linear(&ds),
            Err(Error::InsufficientSamples { samples: 2, features: 2 })
        ));
    }

    #[test]
    fn rank_deficiency_falls_back_to_ridge() {
        // op0 and op1 are always applied together
        let plans: Vec<PerturbationPlan> = [[0, 0, 0], [1, 1, 0], [0, 0, 1], [1, 1, 1]]
            .iter()
            .map(|r| PerturbationPlan::from_bits(r.iter().map(|&b| b == 1).collect()))
            .collect();
        let c = vec![0.5, 0.9, 0.4, 0.8];
        let ds = PerturbationDataset::new(ids(3), plans, c, "A", "").unwrap();
        let fit = fit_linear(&ds).unwrap();
        assert!(fit.degenerate);
        assert!((fit.slopes[0] - fit.slopes[1]).abs() < 1e-6);
        assert!((fit.slopes[0] + fit.slopes[1] - 0.4).abs() < 1e-6);
        assert!(fit.is_optimal(&ds));
    }

    #[test]
    fn softmax_importance_examples() {
        let fit = LinearSurrogate {
            operator_ids: ids(4),
            intercept: 0.5,
            slopes: vec![-0.4, 0.0, 0.0, 0.0],
            degenerate: false,
        };
        let abs = fit.importance(SlopeTransform::Absolute);
        assert!(abs.values[0] > abs.values[1]);
        let id = fit.importance(SlopeTransform::Identity);
        assert!(id.values[0] < id.values[1]);
        let neg = fit.importance(SlopeTransform::Negate);
        assert_eq!(neg.values, abs.values);
        for r in [abs, id, neg] {
            assert!((r.sum() - 1.0).abs() <= 1e-9);
        }
    }

    proptest! {
        #[test]
        fn matches_normal_equations(n in 1usize..=4, seed in any::<u64>()) {
            let plans = all_plans(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = plans.iter().map(|_| rng.random::<f64>()).collect();
            let ds = PerturbationDataset::new(ids(n), plans.clone(), c.clone(), "A", "").unwrap();
            let fit = fit_linear(&ds).unwrap();
            let oracle = normal_equations(&plans, &c);
            prop_assert!((fit.intercept - oracle[0]).abs() <= 1e-8);
            for (s, o) in fit.slopes.iter().zip(&oracle[1..]) {
                prop_assert!((s - o).abs() <= 1e-8);
            }
            prop_assert!(fit.is_optimal(&ds));
        }

        #[test]
        fn scaling_keeps_magnitude_order(seed in any::<u64>(), alpha in 0.01f64..100.0) {
            let plans = all_plans(4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = plans.iter().map(|_| rng.random::<f64>()).collect();
            let ds = PerturbationDataset::new(ids(4), plans, c.clone(), "A", "").unwrap();
            let scaled = ds.with_confidences(c.iter().map(|v| v * alpha).collect()).unwrap();
            let a = fit_linear(&ds).unwrap().importance(SlopeTransform::Absolute);
            let b = fit_linear(&scaled).unwrap().importance(SlopeTransform::Absolute);
            prop_assert_eq!(a.ranked(), b.ranked());
            prop_assert!(b.values.iter().all(|&v| v >= 0.0));
            prop_assert!((b.sum() - 1.0).abs() <= 1e-9);
        }
    }
}
