//! Analytic two-class scorers whose concept dependence is known in closed
//! form. Each reports `[p(A), p(B)]`.

use std::collections::BTreeMap;

use super::{logistic, ProbVector, Scorer, ScorerDescriptor, ScorerKind};
use crate::error::{Error, Result};
use crate::raster::{luma, rgb_to_hsv, Raster};

const LABELS: [&str; 2] = ["A", "B"];

type Ctor = fn(&BTreeMap<String, f64>) -> Result<Box<dyn Scorer>>;

const BUILTINS: &[(&str, Ctor)] = &[
    ("hue_gate", |p| {
        Ok(Box::new(HueGateScorer::new(
            param(p, "k", 1.0),
            param(p, "h0", 90.0),
        )?))
    }),
    ("stripe_orientation", |p| {
        Ok(Box::new(StripeOrientationScorer::new(param(p, "freq", 1.0))?))
    }),
    ("groove_contrast", |p| {
        Ok(Box::new(GrooveContrastScorer::new(param(p, "theta", 40.0))?))
    }),
];

fn param(p: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    p.get(key).copied().unwrap_or(default)
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub(super) fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<Box<dyn Scorer>> {
    let (_, ctor) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "builtin scorer",
            name: name.to_string(),
            valid: builtin_names().join(","),
        })?;
    ctor(params)
}

fn descriptor(name: &str, input_size: Option<(u32, u32)>) -> ScorerDescriptor {
    ScorerDescriptor {
        kind: ScorerKind::Builtin,
        name: name.to_string(),
        input_size,
        class_labels: LABELS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Mean hue over chromatic pixels (saturation > 0). Achromatic pixels,
/// including the black fill left by rotations, carry no hue and are skipped.
/// Returns 0 for a fully achromatic image.
pub fn mean_hue(img: &Raster) -> f64 {
    let (sum, n) = img
        .pixels()
        .iter()
        .map(|&p| rgb_to_hsv(p))
        .filter(|hsv| hsv.s > 0)
        .fold((0.0, 0usize), |(s, n), hsv| (s + hsv.h as f64, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// `p(A) = logistic(k * (mean_hue - h0))`; only hue changes move it.
#[derive(Clone, Debug)]
pub struct HueGateScorer {
    k: f64,
    h0: f64,
    input_size: Option<(u32, u32)>,
}

impl HueGateScorer {
    pub fn new(k: f64, h0: f64) -> Result<Self> {
        if k == 0.0 || !k.is_finite() || !h0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hue_gate needs finite k != 0 and finite h0, got k={k}, h0={h0}"
            )));
        }
        Ok(Self {
            k,
            h0,
            input_size: None,
        })
    }

    pub fn with_input_size(mut self, w: u32, h: u32) -> Self {
        self.input_size = Some((w, h));
        self
    }

    pub fn prob_a(&self, mean_hue: f64) -> f64 {
        logistic(self.k * (mean_hue - self.h0))
    }
}

impl Scorer for HueGateScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        descriptor("hue_gate", self.input_size)
    }

    fn predict(&self, img: &Raster) -> Result<ProbVector> {
        Ok(ProbVector::binary(self.prob_a(mean_hue(img)), &LABELS))
    }
}

/// Share of horizontal-gradient energy. Vertical stripes score near 1,
/// horizontal stripes near 0.
///
/// With `ex`/`ey` the mean absolute Sobel responses along x and y over the
/// interior of the luma image, `p(A) = ex^f / (ex^f + ey^f)` where `f` is the
/// `freq` sharpness (1 gives the plain fraction). A flat image scores 0.5.
#[derive(Clone, Debug)]
pub struct StripeOrientationScorer {
    freq: f64,
    input_size: Option<(u32, u32)>,
}

impl StripeOrientationScorer {
    pub fn new(freq: f64) -> Result<Self> {
        if !(freq > 0.0 && freq.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "stripe_orientation needs freq > 0, got {freq}"
            )));
        }
        Ok(Self {
            freq,
            input_size: None,
        })
    }

    pub fn with_input_size(mut self, w: u32, h: u32) -> Self {
        self.input_size = Some((w, h));
        self
    }
}

/// Mean |Sobel x| and |Sobel y| over interior pixels of the luma image.
/// Accumulated in integers so pixel permutations give identical results.
pub(crate) fn sobel_energies(img: &Raster) -> (f64, f64) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w < 3 || h < 3 {
        return (0.0, 0.0);
    }
    let l: Vec<i64> = img.pixels().iter().map(|&p| luma(p) as i64).collect();
    let at = |x: usize, y: usize| l[y * w + x];
    let (mut ex, mut ey) = (0i64, 0i64);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
            ex += gx.abs();
            ey += gy.abs();
        }
    }
    let n = ((w - 2) * (h - 2)) as f64;
    (ex as f64 / n, ey as f64 / n)
}

impl Scorer for StripeOrientationScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        descriptor("stripe_orientation", self.input_size)
    }

    fn predict(&self, img: &Raster) -> Result<ProbVector> {
        let (ex, ey) = sobel_energies(img);
        let (a, b) = (ex.powf(self.freq), ey.powf(self.freq));
        let p = if a + b == 0.0 { 0.5 } else { a / (a + b) };
        Ok(ProbVector::binary(p, &LABELS))
    }
}

/// `p(A) = logistic(std(luma) - theta)`: high-contrast textures lean to A.
#[derive(Clone, Debug)]
pub struct GrooveContrastScorer {
    theta: f64,
    input_size: Option<(u32, u32)>,
}

impl GrooveContrastScorer {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 255.0) {
            return Err(Error::InvalidParameter(format!(
                "groove_contrast needs theta in (0,255), got {theta}"
            )));
        }
        Ok(Self {
            theta,
            input_size: None,
        })
    }

    pub fn with_input_size(mut self, w: u32, h: u32) -> Self {
        self.input_size = Some((w, h));
        self
    }
}

pub(crate) fn luma_std(img: &Raster) -> f64 {
    let (mut sum, mut sq) = (0u64, 0u64);
    for &p in img.pixels() {
        let v = luma(p) as u64;
        sum += v;
        sq += v * v;
    }
    let n = img.len() as u64;
    // n * sum(v^2) - (sum v)^2 is exact and non-negative
    let spread = (n as u128 * sq as u128 - sum as u128 * sum as u128) as f64;
    spread.sqrt() / n as f64
}

impl Scorer for GrooveContrastScorer {
    fn descriptor(&self) -> ScorerDescriptor {
        descriptor("groove_contrast", self.input_size)
    }

    fn predict(&self, img: &Raster) -> Result<ProbVector> {
        Ok(ProbVector::binary(logistic(luma_std(img) - self.theta), &LABELS))
    }
}
