//! Synthetic textures with known structure and planted concept rankings.
//!
//! Every generator draws from the `synth` substream of the corpus seed, one
//! stream per image index, so image `i` is the same however many images are
//! requested.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concepts::{ConceptRanking, InferredConcept};
use crate::error::{Error, Result};
use crate::raster::{hsv_to_rgb, to_u8, HsvPixel, Raster, Rgb};
use crate::rng::substream;
use crate::segment::BinaryMask;

pub const SYNTH_SIZE: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Vertical bands: dark grooves between streaked plates.
    Stripes,
    /// The same bands running horizontally.
    Horizontal,
    /// Wavy dark grooves on a mottled surface.
    Grooves,
    /// Smooth colour gradients.
    Smooth,
    /// Single-hue fields with brightness texture only.
    Hue,
    /// Bark-like: wavy grooves, plate blocks and fine grain.
    Bark,
}

impl SynthKind {
    pub const ALL: [SynthKind; 6] = [
        SynthKind::Stripes,
        SynthKind::Horizontal,
        SynthKind::Grooves,
        SynthKind::Smooth,
        SynthKind::Hue,
        SynthKind::Bark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Stripes => "stripes",
            SynthKind::Horizontal => "horizontal",
            SynthKind::Grooves => "grooves",
            SynthKind::Smooth => "smooth",
            SynthKind::Hue => "hue",
            SynthKind::Bark => "bark",
        }
    }

    /// Target class for the builtin two-class scorers.
    pub fn class(self) -> &'static str {
        match self {
            SynthKind::Horizontal | SynthKind::Smooth => "B",
            _ => "A",
        }
    }

    /// Ground-truth ranking planted by the generator.
    pub fn planted_ranking(self) -> ConceptRanking {
        use InferredConcept::*;
        let order = match self {
            SynthKind::Stripes => vec![VerticalStripped, Furrow, Plated, Rugged, Smooth],
            SynthKind::Horizontal => vec![Plated, Rugged, Furrow, Smooth, VerticalStripped],
            SynthKind::Grooves => vec![Rugged, Furrow, VerticalStripped, Plated, Smooth],
            SynthKind::Smooth | SynthKind::Hue => {
                vec![Smooth, Plated, Rugged, Furrow, VerticalStripped]
            }
            SynthKind::Bark => vec![Rugged, Furrow, VerticalStripped, Plated, Smooth],
        };
        ConceptRanking::from_order(order).expect("planted rankings are permutations")
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "synthetic texture kind",
                name: s.to_string(),
                valid: Self::ALL.map(|k| k.name()).join(", "),
            })
    }
}

#[derive(Clone, Debug)]
pub struct SynthImage {
    pub kind: SynthKind,
    pub image: Raster,
    /// Pixels the generator painted as groove, when the kind has grooves.
    pub groove_truth: Option<BinaryMask>,
    pub ranking: ConceptRanking,
    pub class: String,
}

/// Hue range of [`SynthKind::Hue`] fields, in half-degrees.
pub const HUE_FIELD_RANGE: (f32, f32) = (70.0, 110.0);

pub fn generate(kind: SynthKind, seed: u64, index: u64) -> SynthImage {
    let mut rng = substream(seed, &format!("synth/{}", kind.name()), index);
    let (image, groove_truth) = match kind {
        SynthKind::Stripes => {
            let (img, mask) = bands(&mut rng);
            (img, Some(mask))
        }
        SynthKind::Horizontal => {
            let (img, mask) = bands(&mut rng);
            let n = SYNTH_SIZE;
            let t = Raster::from_fn(n, n, |x, y| img.get(y, x));
            let m = BinaryMask::from_fn(n, n, |x, y| mask.get(y, x));
            (t, Some(m))
        }
        SynthKind::Grooves => {
            let (img, mask) = wavy_grooves(&mut rng, false);
            (img, Some(mask))
        }
        SynthKind::Bark => {
            let (img, mask) = wavy_grooves(&mut rng, true);
            (img, Some(mask))
        }
        SynthKind::Smooth => (gradient(&mut rng), None),
        SynthKind::Hue => (hue_field(&mut rng), None),
    };
    SynthImage {
        kind,
        image,
        groove_truth,
        ranking: kind.planted_ranking(),
        class: kind.class().to_string(),
    }
}

fn tint(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let warm = rng.random_range(0.0..0.25);
    [1.0, 0.85 - warm * 0.3, 0.7 - warm]
}

fn paint(level: f64, tint: [f64; 3]) -> Rgb {
    tint.map(|t| to_u8(level * t))
}

/// Vertical bands of period 28–40 px: a dark groove over ~40% of the period
/// and a plate carrying a bright streak in its middle.
fn bands(rng: &mut ChaCha8Rng) -> (Raster, BinaryMask) {
    let n = SYNTH_SIZE;
    let period = rng.random_range(28..=40u32);
    let groove_w = (period as f64 * rng.random_range(0.38..0.45)).round() as u32;
    // keep the bands cut by the image border at least 5 px wide, so that
    // the opening in the segmentation does not erase them
    let piece_ok = |phase: u32| {
        let left = phase % period;
        let left_w = if left < groove_w { groove_w - left } else { period - left };
        let right = (n - 1 + phase) % period;
        let right_w = if right < groove_w { right + 1 } else { right - groove_w + 1 };
        left_w >= 5 && right_w >= 5
    };
    let start = rng.random_range(0..period);
    let phase = (0..period)
        .map(|k| (start + k) % period)
        .find(|&p| piece_ok(p))
        .unwrap_or(start);
    let dark = rng.random_range(35.0..60.0);
    let plate = rng.random_range(150.0..175.0);
    let streak = rng.random_range(35.0..50.0);
    let tint = tint(rng);
    let noise: Vec<f64> = (0..n * n).map(|_| rng.random_range(-6.0..6.0)).collect();
    let is_groove = |x: u32| (x + phase) % period < groove_w;
    let img = Raster::from_fn(n, n, |x, y| {
        let u = (x + phase) % period;
        let level = if u < groove_w {
            dark
        } else {
            let t = (u - groove_w) as f64 / (period - groove_w) as f64;
            plate + streak * (std::f64::consts::PI * t).sin()
        };
        paint(level + noise[(y * n + x) as usize], tint)
    });
    let mask = BinaryMask::from_fn(n, n, |x, _| is_groove(x));
    (img, mask)
}

/// Dark grooves winding down the image. The bark variant adds plate blocks
/// of varying brightness and horizontal cracks.
fn wavy_grooves(rng: &mut ChaCha8Rng, bark: bool) -> (Raster, BinaryMask) {
    let n = SYNTH_SIZE;
    let count = rng.random_range(3..=4u32);
    let spacing = n as f64 / count as f64;
    let grooves: Vec<(f64, f64, f64, f64, f64)> = (0..count)
        .map(|i| {
            let x0 = spacing * (i as f64 + rng.random_range(0.35..0.65));
            let amp = rng.random_range(3.0..8.0);
            let wavelength = rng.random_range(40.0..90.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let half_width = rng.random_range(5.5..8.0);
            (x0, amp, wavelength, phase, half_width)
        })
        .collect();
    let dark = rng.random_range(30.0..55.0);
    let surface = rng.random_range(150.0..180.0);
    let tint = tint(rng);
    let block_h = rng.random_range(18..30u32);
    let blocks: Vec<f64> = (0..(n / block_h + 2) * (count + 1))
        .map(|_| if bark { rng.random_range(-25.0..25.0) } else { 0.0 })
        .collect();
    let cracks: Vec<u32> = if bark {
        (0..rng.random_range(2..5)).map(|_| rng.random_range(0..n)).collect()
    } else {
        Vec::new()
    };
    let noise_amp = if bark { 12.0 } else { 6.0 };
    let noise: Vec<f64> = (0..n * n)
        .map(|_| rng.random_range(-noise_amp..noise_amp))
        .collect();
    let groove_at = |x: u32, y: u32| {
        grooves.iter().any(|&(x0, amp, wl, ph, hw)| {
            let cx = x0 + amp * (std::f64::consts::TAU * y as f64 / wl + ph).sin();
            (x as f64 - cx).abs() <= hw
        })
    };
    let mask = BinaryMask::from_fn(n, n, groove_at);
    let img = Raster::from_fn(n, n, |x, y| {
        let level = if mask.get(x, y) {
            dark
        } else {
            let col = (x as f64 / spacing) as u32;
            let row = y / block_h;
            let mut l = surface + blocks[(row * (count + 1) + col) as usize];
            if cracks.iter().any(|&cy| cy.abs_diff(y) <= 1) {
                l -= 45.0;
            }
            l
        };
        paint(level + noise[(y * n + x) as usize], tint)
    });
    (img, mask)
}

fn gradient(rng: &mut ChaCha8Rng) -> Raster {
    let n = SYNTH_SIZE;
    let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(60.0..200.0));
    let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(60.0..200.0));
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let noise: Vec<f64> = (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Raster::from_fn(n, n, |x, y| {
        let u = ((x as f64 - 63.5) * dx + (y as f64 - 63.5) * dy) / 181.0 + 0.5;
        let e = noise[(y * n + x) as usize];
        std::array::from_fn(|c| to_u8(a[c] + (b[c] - a[c]) * u + e))
    })
}

/// One hue and saturation; brightness varies in soft blobs.
fn hue_field(rng: &mut ChaCha8Rng) -> Raster {
    let n = SYNTH_SIZE;
    let h = rng.random_range(HUE_FIELD_RANGE.0..HUE_FIELD_RANGE.1);
    let s = rng.random_range(140..=200u8);
    let fx = rng.random_range(0.03..0.08);
    let fy = rng.random_range(0.03..0.08);
    let ph = rng.random_range(0.0..std::f64::consts::TAU);
    let noise: Vec<f64> = (0..n * n).map(|_| rng.random_range(-8.0..8.0)).collect();
    Raster::from_fn(n, n, |x, y| {
        let v = 170.0 + 40.0 * ((x as f64 * fx + ph).sin() * (y as f64 * fy).cos())
            + noise[(y * n + x) as usize];
        hsv_to_rgb(HsvPixel { h, s, v: to_u8(v) })
    })
}
