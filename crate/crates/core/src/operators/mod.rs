//! Concept key-value operators, the registry they live in, plan composition
//! and the numerical commutativity check.
//!
//! Each operator manipulates one concept (color, texture, shape or
//! groove/surface) and is registered under a stable id such as `tune_5`.
//! A [`PerturbationPlan`] selects a subset of the registry; [`compose`]
//! applies that subset in the registry's canonical order so that a plan maps
//! to exactly one perturbed image.

mod color;
mod geometry;
mod removal;
mod smooth;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use color::hue_shift;
pub use geometry::{flip, rotate, FlipAxis};
pub use removal::{remove_region, remove_region_within, Region, RemovalOutcome};
pub use smooth::{bilateral_smooth, BILATERAL_DIAMETER};

use crate::error::{Error, Result};
use crate::raster::{mean_abs_error, Raster};
use crate::segment::{segment_grooves_within, BinaryMask, SegmentationParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Concept {
    Color,
    Texture,
    Shape,
    GrooveSurface,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorValue {
    Signed(i32),
    Horizontal,
    Vertical,
    Remove,
}

impl fmt::Display for OperatorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorValue::Signed(v) => write!(f, "{v:+}"),
            OperatorValue::Horizontal => f.write_str("horizontal"),
            OperatorValue::Vertical => f.write_str("vertical"),
            OperatorValue::Remove => f.write_str("remove"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub id: String,
    pub concept: Concept,
    pub key: String,
    pub value: OperatorValue,
}

/// Position in the canonical composition order. Geometry runs first, then
/// region removal, then smoothing, then hue tuning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Geometry,
    Removal,
    Smooth,
    Tune,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbWarning {
    pub operator: String,
    pub message: String,
}

/// State shared by the operators of one composition.
#[derive(Debug)]
pub struct ApplyContext<'a> {
    pub seg_params: &'a SegmentationParams,
    groove_mask: Option<BinaryMask>,
    footprint: Option<BinaryMask>,
    pub warnings: Vec<PerturbWarning>,
}

impl<'a> ApplyContext<'a> {
    pub fn new(seg_params: &'a SegmentationParams) -> Self {
        Self {
            seg_params,
            groove_mask: None,
            footprint: None,
            warnings: Vec::new(),
        }
    }

    /// Pixels that still carry source content, or `None` while that is every
    /// pixel. Rotations shrink it by the black fill they introduce.
    pub fn footprint(&self) -> Option<&BinaryMask> {
        self.footprint.as_ref()
    }

    /// Push the footprint through a geometric transform of the image.
    fn carry_footprint(&mut self, (w, h): (u32, u32), transform: impl Fn(&Raster) -> Raster) {
        let current = self.footprint.take().unwrap_or_else(|| BinaryMask::full(w, h));
        let canvas = Raster::from_fn(w, h, |x, y| if current.get(x, y) { [255; 3] } else { [0; 3] });
        let moved = transform(&canvas);
        let next = BinaryMask::from_fn(w, h, |x, y| moved.get(x, y)[0] >= 128);
        self.footprint = (next.count() < (w as usize * h as usize)).then_some(next);
    }

    /// Groove mask of the first image it is requested for; later removals in
    /// the same composition reuse it. Only footprint pixels are segmented.
    pub fn groove_mask(&mut self, img: &Raster) -> &BinaryMask {
        let params = self.seg_params;
        let footprint = self.footprint.as_ref();
        self.groove_mask
            .get_or_insert_with(|| segment_grooves_within(img, footprint, params))
    }
}

pub trait Operator: Send + Sync + fmt::Debug {
    fn spec(&self) -> &OperatorSpec;
    fn stage(&self) -> Stage;
    fn apply(&self, img: &Raster, ctx: &mut ApplyContext<'_>) -> Result<Raster>;

    fn id(&self) -> &str {
        &self.spec().id
    }
}

#[derive(Debug)]
pub struct TuneOp {
    spec: OperatorSpec,
    delta: f32,
}

impl TuneOp {
    pub fn new(delta: i32) -> Self {
        Self {
            spec: OperatorSpec {
                id: format!("tune_{delta}"),
                concept: Concept::Color,
                key: "Tune".into(),
                value: OperatorValue::Signed(delta),
            },
            delta: delta as f32,
        }
    }
}

impl Operator for TuneOp {
    fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    fn stage(&self) -> Stage {
        Stage::Tune
    }

    fn apply(&self, img: &Raster, _ctx: &mut ApplyContext<'_>) -> Result<Raster> {
        Ok(hue_shift(img, self.delta))
    }
}

#[derive(Debug)]
pub struct SmoothOp {
    spec: OperatorSpec,
    sigma: f64,
}

impl SmoothOp {
    pub fn new(sigma: i32) -> Self {
        Self {
            spec: OperatorSpec {
                id: format!("smooth_{sigma}"),
                concept: Concept::Texture,
                key: "Smooth".into(),
                value: OperatorValue::Signed(sigma),
            },
            sigma: sigma as f64,
        }
    }
}

impl Operator for SmoothOp {
    fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    fn stage(&self) -> Stage {
        Stage::Smooth
    }

    fn apply(&self, img: &Raster, _ctx: &mut ApplyContext<'_>) -> Result<Raster> {
        bilateral_smooth(img, self.sigma)
    }
}

#[derive(Debug)]
pub struct FlipOp {
    spec: OperatorSpec,
    axis: FlipAxis,
}

impl FlipOp {
    pub fn new(axis: FlipAxis) -> Self {
        let (id, value) = match axis {
            FlipAxis::Horizontal => ("flip_h", OperatorValue::Horizontal),
            FlipAxis::Vertical => ("flip_v", OperatorValue::Vertical),
        };
        Self {
            spec: OperatorSpec {
                id: id.into(),
                concept: Concept::Shape,
                key: "Flip".into(),
                value,
            },
            axis,
        }
    }
}

impl Operator for FlipOp {
    fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    fn stage(&self) -> Stage {
        Stage::Geometry
    }

    fn apply(&self, img: &Raster, ctx: &mut ApplyContext<'_>) -> Result<Raster> {
        if ctx.footprint.is_some() {
            ctx.carry_footprint(img.dims(), |m| flip(m, self.axis));
        }
        Ok(flip(img, self.axis))
    }
}

#[derive(Debug)]
pub struct RotateOp {
    spec: OperatorSpec,
    degrees: i32,
}

impl RotateOp {
    pub fn new(degrees: i32) -> Self {
        Self {
            spec: OperatorSpec {
                id: format!("rotate_{degrees:+}"),
                concept: Concept::Shape,
                key: "Rotate".into(),
                value: OperatorValue::Signed(degrees),
            },
            degrees,
        }
    }
}

impl Operator for RotateOp {
    fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    fn stage(&self) -> Stage {
        Stage::Geometry
    }

    fn apply(&self, img: &Raster, ctx: &mut ApplyContext<'_>) -> Result<Raster> {
        ctx.carry_footprint(img.dims(), |m| rotate(m, self.degrees));
        Ok(rotate(img, self.degrees))
    }
}

#[derive(Debug)]
pub struct RemoveOp {
    spec: OperatorSpec,
    region: Region,
}

impl RemoveOp {
    pub fn new(region: Region) -> Self {
        let (id, key) = match region {
            Region::Groove => ("groove_remove", "Groove"),
            Region::Surface => ("surface_remove", "Surface"),
        };
        Self {
            spec: OperatorSpec {
                id: id.into(),
                concept: Concept::GrooveSurface,
                key: key.into(),
                value: OperatorValue::Remove,
            },
            region,
        }
    }
}

impl Operator for RemoveOp {
    fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    fn stage(&self) -> Stage {
        Stage::Removal
    }

    fn apply(&self, img: &Raster, ctx: &mut ApplyContext<'_>) -> Result<Raster> {
        let mask = ctx.groove_mask(img).clone();
        let out = remove_region_within(img, &mask, ctx.footprint(), self.region)?;
        if out.degenerate {
            ctx.warnings.push(PerturbWarning {
                operator: self.spec.id.clone(),
                message: "kept region is empty; image left unchanged".into(),
            });
        }
        Ok(out.image)
    }
}

/// Ordered, immutable set of operators.
#[derive(Clone, Debug)]
pub struct OperatorRegistry {
    ops: Vec<Arc<dyn Operator>>,
    canonical: Vec<usize>,
}

/// Ids of the default registry, in registry (column) order.
pub const DEFAULT_OPERATOR_IDS: [&str; 12] = [
    "tune_5",
    "tune_10",
    "smooth_150",
    "smooth_300",
    "flip_h",
    "flip_v",
    "rotate_+30",
    "rotate_-30",
    "rotate_+90",
    "rotate_-90",
    "groove_remove",
    "surface_remove",
];

impl Default for OperatorRegistry {
    fn default() -> Self {
        let ops: Vec<Arc<dyn Operator>> = vec![
            Arc::new(TuneOp::new(5)),
            Arc::new(TuneOp::new(10)),
            Arc::new(SmoothOp::new(150)),
            Arc::new(SmoothOp::new(300)),
            Arc::new(FlipOp::new(FlipAxis::Horizontal)),
            Arc::new(FlipOp::new(FlipAxis::Vertical)),
            Arc::new(RotateOp::new(30)),
            Arc::new(RotateOp::new(-30)),
            Arc::new(RotateOp::new(90)),
            Arc::new(RotateOp::new(-90)),
            Arc::new(RemoveOp::new(Region::Groove)),
            Arc::new(RemoveOp::new(Region::Surface)),
        ];
        Self::new(ops).expect("default registry is well formed")
    }
}

impl OperatorRegistry {
    pub fn new(ops: Vec<Arc<dyn Operator>>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidParameter("operator registry is empty".into()));
        }
        let mut ids = HashSet::new();
        let mut triples = HashSet::new();
        for op in &ops {
            let s = op.spec();
            if !ids.insert(s.id.clone()) {
                return Err(Error::InvalidParameter(format!("duplicate operator id {}", s.id)));
            }
            if !triples.insert((s.concept, s.key.clone(), s.value)) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate concept/key/value for {}",
                    s.id
                )));
            }
        }
        let mut canonical: Vec<usize> = (0..ops.len()).collect();
        canonical.sort_by_key(|&i| (ops[i].stage(), i));
        Ok(Self { ops, canonical })
    }

    /// Registry restricted to `ids`, in the given order.
    pub fn subset(&self, ids: &[&str]) -> Result<Self> {
        let ops = ids
            .iter()
            .map(|id| self.index_of(id).map(|i| self.ops[i].clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn get(&self, index: usize) -> &dyn Operator {
        self.ops[index].as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Operator> {
        self.ops.iter().map(|op| op.as_ref())
    }

    pub fn ids(&self) -> Vec<String> {
        self.ops.iter().map(|op| op.id().to_string()).collect()
    }

    pub fn specs(&self) -> Vec<OperatorSpec> {
        self.ops.iter().map(|op| op.spec().clone()).collect()
    }

    pub fn canonical_order(&self) -> &[usize] {
        &self.canonical
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ops
            .iter()
            .position(|op| op.id() == id)
            .ok_or_else(|| Error::UnknownOperator {
                id: id.to_string(),
                valid: self.ids().join(","),
            })
    }

    /// Parse a comma-separated id list; `all` selects every operator.
    pub fn parse_ids(&self, list: &str) -> Result<Vec<usize>> {
        if list.trim() == "all" {
            return Ok((0..self.len()).collect());
        }
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|id| self.index_of(id))
            .collect()
    }
}

/// Binary inclusion vector over a registry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PerturbationPlan {
    bits: Vec<bool>,
}

impl PerturbationPlan {
    pub fn empty(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut plan = Self::empty(len);
        for &i in indices {
            plan.bits[i] = true;
        }
        plan
    }

    pub fn from_ids(registry: &OperatorRegistry, ids: &str) -> Result<Self> {
        Ok(Self::from_indices(registry.len(), &registry.parse_ids(ids)?))
    }

    pub fn all(len: usize) -> Self {
        Self {
            bits: vec![true; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.bits[i] = on;
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn describe(&self, registry: &OperatorRegistry) -> String {
        let ids: Vec<&str> = self.selected().map(|i| registry.get(i).id()).collect();
        if ids.is_empty() {
            "identity".into()
        } else {
            ids.join("+")
        }
    }
}

#[derive(Clone, Debug)]
pub struct Composed {
    pub image: Raster,
    pub warnings: Vec<PerturbWarning>,
}

/// Apply the plan's operators in canonical order. The groove mask is computed
/// once, on the image as it stands right before the first removal.
pub fn compose(
    img: &Raster,
    plan: &PerturbationPlan,
    registry: &OperatorRegistry,
    seg_params: &SegmentationParams,
) -> Result<Composed> {
    if plan.len() != registry.len() {
        return Err(Error::RegistryMismatch(format!(
            "plan has {} bits, registry has {} operators",
            plan.len(),
            registry.len()
        )));
    }
    let mut ctx = ApplyContext::new(seg_params);
    let mut current = img.clone();
    for &i in registry.canonical_order() {
        if plan.get(i) {
            current = registry.get(i).apply(&current, &mut ctx)?;
        }
    }
    Ok(Composed {
        image: current,
        warnings: ctx.warnings,
    })
}

/// Apply operators one after another in exactly the given order, each as a
/// standalone function (removals segment the image they receive). Rotation
/// fill stays outside the footprint for every later operator.
pub fn apply_in_order(
    img: &Raster,
    order: &[usize],
    registry: &OperatorRegistry,
    seg_params: &SegmentationParams,
) -> Result<Raster> {
    let mut current = img.clone();
    let mut ctx = ApplyContext::new(seg_params);
    for &i in order {
        ctx.groove_mask = None;
        current = registry.get(i).apply(&current, &mut ctx)?;
    }
    Ok(current)
}

/// Mean pairwise MAE between the results of applying the plan's operators in
/// `n_orders` seeded random orders. Zero means the selection commutes on this
/// image.
pub fn cuco_score(
    img: &Raster,
    plan: &PerturbationPlan,
    registry: &OperatorRegistry,
    seg_params: &SegmentationParams,
    n_orders: usize,
    seed: u64,
) -> Result<f64> {
    if plan.len() != registry.len() {
        return Err(Error::RegistryMismatch(format!(
            "plan has {} bits, registry has {} operators",
            plan.len(),
            registry.len()
        )));
    }
    let selected: Vec<usize> = plan.selected().collect();
    if selected.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "commutativity check needs at least 2 operators, plan selects {}",
            selected.len()
        )));
    }
    if n_orders < 2 {
        return Err(Error::InvalidParameter(format!(
            "commutativity check needs at least 2 orders, got {n_orders}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders: Vec<Vec<usize>> = (0..n_orders)
        .map(|_| {
            let mut order = selected.clone();
            order.shuffle(&mut rng);
            order
        })
        .collect();
    let images = orders
        .iter()
        .map(|order| apply_in_order(img, order, registry, seg_params))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            total += mean_abs_error(&images[i], &images[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture() -> Raster {
        Raster::from_fn(32, 32, |x, y| {
            let dark = (x / 12) % 2 == 1;
            let n = ((x * 31 + y * 17) % 23) as u8;
            if dark {
                [40 + n, 30 + n, 20]
            } else {
                [190 + n, 160 + n, 120]
            }
        })
    }

    #[test]
    fn default_registry_shape() {
        let reg = OperatorRegistry::default();
        assert_eq!(reg.len(), 12);
        assert_eq!(reg.ids(), DEFAULT_OPERATOR_IDS.map(String::from).to_vec());
        let stages: Vec<Stage> = reg.canonical_order().iter().map(|&i| reg.get(i).stage()).collect();
        assert!(stages.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(reg.get(reg.canonical_order()[0]).id(), "flip_h");
        assert_eq!(reg.get(*reg.canonical_order().last().unwrap()).id(), "tune_10");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let ops: Vec<Arc<dyn Operator>> = vec![Arc::new(TuneOp::new(5)), Arc::new(TuneOp::new(5))];
        assert!(OperatorRegistry::new(ops).is_err());
    }

    #[test]
    fn unknown_id_lists_valid_ones() {
        let reg = OperatorRegistry::default();
        let err = reg.parse_ids("tune_7").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tune_7") && msg.contains("surface_remove"));
        assert_eq!(reg.parse_ids("all").unwrap().len(), 12);
    }

    #[test]
    fn identity_plan() {
        let reg = OperatorRegistry::default();
        let img = texture();
        let out = compose(&img, &PerturbationPlan::empty(12), &reg, &Default::default()).unwrap();
        assert!(mean_abs_error(&img, &out.image).unwrap() <= 1.0);
    }

    #[test]
    fn singleton_plans_match_operators() {
        let reg = OperatorRegistry::default();
        let img = texture();
        let seg = SegmentationParams::default();
        for i in 0..reg.len() {
            let plan = PerturbationPlan::from_indices(12, &[i]);
            let composed = compose(&img, &plan, &reg, &seg).unwrap().image;
            let direct = apply_in_order(&img, &[i], &reg, &seg).unwrap();
            assert_eq!(composed, direct, "{}", reg.get(i).id());
            assert_eq!(composed.dims(), img.dims());
        }
        let plan = PerturbationPlan::from_ids(&reg, "flip_h").unwrap();
        assert_eq!(
            compose(&img, &plan, &reg, &seg).unwrap().image,
            flip(&img, FlipAxis::Horizontal)
        );
    }

    #[test]
    fn double_flip_is_half_turn() {
        let reg = OperatorRegistry::default();
        let img = texture();
        let plan = PerturbationPlan::from_ids(&reg, "flip_h,flip_v").unwrap();
        let out = compose(&img, &plan, &reg, &Default::default()).unwrap().image;
        assert_eq!(out, rotate(&img, 180));
    }

    #[test]
    fn compose_is_deterministic() {
        let reg = OperatorRegistry::default();
        let img = texture();
        let plan = PerturbationPlan::all(12);
        let seg = SegmentationParams::default();
        let a = compose(&img, &plan, &reg, &seg).unwrap().image;
        let b = compose(&img, &plan, &reg, &seg).unwrap().image;
        assert_eq!(a, b);
        assert_eq!(a.dims(), img.dims());
    }

    #[test]
    fn removal_of_everything_warns() {
        let reg = OperatorRegistry::default();
        // Otsu puts the dark half in the groove class; both removals then run
        // against that one mask and neither is degenerate.
        let img = texture();
        let plan = PerturbationPlan::from_ids(&reg, "groove_remove,surface_remove").unwrap();
        let out = compose(&img, &plan, &reg, &Default::default()).unwrap();
        assert!(out.warnings.is_empty());
        // A mask covering everything leaves nothing to fill from.
        let seg = SegmentationParams::default();
        let mut ctx = ApplyContext::new(&seg);
        ctx.groove_mask = Some(BinaryMask::full(32, 32));
        let groove = RemoveOp::new(Region::Groove);
        let same = groove.apply(&img, &mut ctx).unwrap();
        assert_eq!(same, img);
        assert_eq!(ctx.warnings.len(), 1);
    }

    #[test]
    fn plan_length_checked() {
        let reg = OperatorRegistry::default();
        assert!(compose(&texture(), &PerturbationPlan::empty(3), &reg, &Default::default()).is_err());
    }

    #[test]
    fn cuco_of_commuting_flips_is_zero() {
        let reg = OperatorRegistry::default();
        let seg = SegmentationParams::default();
        let plan = PerturbationPlan::from_ids(&reg, "flip_h,flip_v").unwrap();
        assert_eq!(cuco_score(&texture(), &plan, &reg, &seg, 6, 1).unwrap(), 0.0);
        let quarter = PerturbationPlan::from_ids(&reg, "rotate_+90,rotate_-90").unwrap();
        assert_eq!(cuco_score(&texture(), &quarter, &reg, &seg, 6, 1).unwrap(), 0.0);
    }

    #[test]
    fn cuco_flip_and_quarter_turn_do_not_commute() {
        let reg = OperatorRegistry::default();
        let plan = PerturbationPlan::from_ids(&reg, "flip_h,rotate_+90").unwrap();
        let score = cuco_score(&texture(), &plan, &reg, &Default::default(), 8, 3).unwrap();
        assert!(score > 0.0);
    }

    #[test]
    fn cuco_of_hue_tunes_is_small() {
        let reg = OperatorRegistry::default();
        let plan = PerturbationPlan::from_ids(&reg, "tune_5,tune_10").unwrap();
        let score = cuco_score(&texture(), &plan, &reg, &Default::default(), 6, 9).unwrap();
        assert!(score <= 1.0, "{score}");
    }

    #[test]
    fn cuco_rejects_small_plans() {
        let reg = OperatorRegistry::default();
        let plan = PerturbationPlan::from_ids(&reg, "tune_5").unwrap();
        assert!(cuco_score(&texture(), &plan, &reg, &Default::default(), 4, 0).is_err());
        let two = PerturbationPlan::from_ids(&reg, "tune_5,tune_10").unwrap();
        assert!(cuco_score(&texture(), &two, &reg, &Default::default(), 1, 0).is_err());
    }

    #[test]
    fn removal_leaves_rotation_fill_alone() {
        let reg = OperatorRegistry::default();
        let seg = SegmentationParams::default();
        let field = Raster::from_fn(48, 48, |x, y| {
            let v = 150 + ((x * 7 + y * 3) % 60) as u8;
            [v / 4, v, v / 2]
        });
        let plan = PerturbationPlan::from_ids(&reg, "rotate_+30,surface_remove").unwrap();
        let out = compose(&field, &plan, &reg, &seg).unwrap().image;
        assert_eq!(out.get(0, 0), [0, 0, 0]);
        let center = out.get(24, 24);
        assert!(center[1] > center[2] && center[2] > center[0], "{center:?}");
        let rotated = rotate(&field, 30);
        let kept = (0..48 * 48)
            .filter(|&i| {
                let (x, y) = (i % 48, i / 48);
                rotated.get(x, y) == [0, 0, 0]
            })
            .all(|i| out.get(i % 48, i / 48) == [0, 0, 0]);
        assert!(kept);
    }

    #[test]
    fn ordered_removal_after_rotation_matches_composition() {
        let reg = OperatorRegistry::default();
        let seg = SegmentationParams::default();
        let field = Raster::from_fn(48, 48, |x, y| {
            let v = 150 + ((x * 7 + y * 3) % 60) as u8;
            [v / 4, v, v / 2]
        });
        let plan = PerturbationPlan::from_ids(&reg, "rotate_+30,surface_remove").unwrap();
        let order: Vec<usize> = plan.selected().collect();
        assert_eq!(
            apply_in_order(&field, &order, &reg, &seg).unwrap(),
            compose(&field, &plan, &reg, &seg).unwrap().image
        );
    }
}
