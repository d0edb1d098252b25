//! Groove/surface segmentation: grayscale, Otsu binarization, morphological
//! cleanup and small-component removal.
//!
//! The darker Otsu class is taken to be the groove region.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{to_grayscale, GrayRaster, Raster};

/// One bit per pixel, row-major. `true` marks a groove pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidParameter(format!(
                "mask of {width}x{height} needs {} bits, got {}",
                width as usize * height as usize,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Logical NOT; the surface mask of a groove mask.
    /// White where set, black elsewhere.
    pub fn to_raster(&self) -> Raster {
        Raster::from_fn(self.width, self.height, |x, y| if self.get(x, y) { [255; 3] } else { [0; 3] })
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn iou(&self, other: &Self) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    /// Side of the square structuring element. Odd, at least 3.
    pub morph_kernel: u32,
    pub morph_iterations: u32,
    /// Components smaller than this fraction of the image area are dropped.
    pub min_component_area_frac: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            morph_kernel: 5,
            morph_iterations: 2,
            min_component_area_frac: 0.001,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.morph_kernel < 3 || self.morph_kernel % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "morph_kernel must be odd and >= 3, got {}",
                self.morph_kernel
            )));
        }
        if self.morph_iterations == 0 {
            return Err(Error::InvalidParameter("morph_iterations must be >= 1".into()));
        }
        if !(self.min_component_area_frac > 0.0 && self.min_component_area_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "min_component_area_frac must lie in (0,1), got {}",
                self.min_component_area_frac
            )));
        }
        Ok(())
    }
}

/// Returned by [`otsu_threshold`] when the histogram has a single occupied bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegenerateHistogram;

pub fn histogram(gray: &GrayRaster) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in gray.pixels() {
        hist[v as usize] += 1;
    }
    hist
}

/// Otsu's threshold over a 256-bin histogram.
///
/// Class 0 is `value <= t`, class 1 is `value > t`. Between-class variance is
/// compared exactly as the rational `(S0*N - S*n0)^2 / (n0*n1)` so ties are
/// real ties and resolve to the smallest `t`.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> std::result::Result<u8, DegenerateHistogram> {
    let total: u64 = hist.iter().sum();
    let sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &n)| v as u128 * n as u128)
        .sum();
    let mut best: Option<(u8, u128, u128)> = None;
    let mut n0 = 0u64;
    let mut s0 = 0u128;
    for t in 0..255usize {
        n0 += hist[t];
        s0 += t as u128 * hist[t] as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (s0 * total as u128).abs_diff(sum * n0 as u128);
        let num = diff * diff;
        let den = n0 as u128 * n1 as u128;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => wide_mul(num, bd) > wide_mul(bn, den),
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    match best {
        Some((t, num, _)) if num > 0 => Ok(t),
        _ => Err(DegenerateHistogram),
    }
}

pub fn otsu_threshold(gray: &GrayRaster) -> std::result::Result<u8, DegenerateHistogram> {
    otsu_from_histogram(&histogram(gray))
}

/// Full 256-bit product of two u128 values as (high, low).
fn wide_mul(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a_hi, a_lo) = (a >> 64, a & MASK);
    let (b_hi, b_lo) = (b >> 64, b & MASK);
    let ll = a_lo * b_lo;
    let lh = a_lo * b_hi;
    let hl = a_hi * b_lo;
    let hh = a_hi * b_hi;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let low = (ll & MASK) | (mid << 64);
    let high = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (high, low)
}

/// Square-window min (erode) or max (dilate), separable. Out-of-bounds
/// neighbors are ignored, so the border neither erodes nor grows.
fn square_filter(mask: &BinaryMask, kernel: u32, erode: bool) -> BinaryMask {
    let r = (kernel / 2) as i64;
    let (w, h) = (mask.width as i64, mask.height as i64);
    let pick = |acc: bool, v: bool| if erode { acc && v } else { acc || v };
    let mut tmp = vec![false; mask.bits.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = erode;
            for dx in -r..=r {
                let xx = x + dx;
                if xx >= 0 && xx < w {
                    acc = pick(acc, mask.bits[(y * w + xx) as usize]);
                }
            }
            tmp[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![false; mask.bits.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = erode;
            for dy in -r..=r {
                let yy = y + dy;
                if yy >= 0 && yy < h {
                    acc = pick(acc, tmp[(yy * w + x) as usize]);
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: out,
    }
}

pub fn erode(mask: &BinaryMask, kernel: u32) -> BinaryMask {
    square_filter(mask, kernel, true)
}

pub fn dilate(mask: &BinaryMask, kernel: u32) -> BinaryMask {
    square_filter(mask, kernel, false)
}

/// Erode `morph_iterations` times, then dilate as many times.
pub fn morph_open(mask: &BinaryMask, params: &SegmentationParams) -> BinaryMask {
    let mut m = mask.clone();
    for _ in 0..params.morph_iterations {
        m = erode(&m, params.morph_kernel);
    }
    for _ in 0..params.morph_iterations {
        m = dilate(&m, params.morph_kernel);
    }
    m
}

/// Dilate `morph_iterations` times, then erode as many times.
pub fn morph_close(mask: &BinaryMask, params: &SegmentationParams) -> BinaryMask {
    let mut m = mask.clone();
    for _ in 0..params.morph_iterations {
        m = dilate(&m, params.morph_kernel);
    }
    for _ in 0..params.morph_iterations {
        m = erode(&m, params.morph_kernel);
    }
    m
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub area: usize,
    /// Every pixel of the component.
    pub pixels: Vec<(u32, u32)>,
    /// Component pixels with at least one 4-neighbor outside the component
    /// (or outside the image).
    pub contour: Vec<(u32, u32)>,
}

/// 8-connected components in scan order of their first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut seen = vec![false; mask.bits.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i as i64) % w, (i as i64) / w);
            pixels.push((x as u32, y as u32));
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask.bits[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        let contour = pixels
            .iter()
            .copied()
            .filter(|&(x, y)| {
                let (x, y) = (x as i64, y as i64);
                [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx < 0 || ny < 0 || nx >= w || ny >= h || !mask.bits[(ny * w + nx) as usize]
                })
            })
            .collect();
        out.push(Component {
            area: pixels.len(),
            pixels,
            contour,
        });
    }
    out
}

/// Groove mask of `img`. A constant image yields an empty mask.
pub fn segment_grooves(img: &Raster, params: &SegmentationParams) -> BinaryMask {
    segment_grooves_within(img, None, params)
}

/// Groove mask restricted to `footprint`: the threshold is chosen from
/// footprint pixels only and nothing outside it is labelled groove.
pub fn segment_grooves_within(
    img: &Raster,
    footprint: Option<&BinaryMask>,
    params: &SegmentationParams,
) -> BinaryMask {
    let (w, h) = img.dims();
    let gray = to_grayscale(img);
    let inside = |i: usize| footprint.map_or(true, |f| f.bits[i]);
    let t = match footprint {
        None => otsu_threshold(&gray),
        Some(_) => {
            let mut hist = [0u64; 256];
            for (i, &v) in gray.pixels().iter().enumerate() {
                if inside(i) {
                    hist[v as usize] += 1;
                }
            }
            otsu_from_histogram(&hist)
        }
    };
    let Ok(t) = t else {
        return BinaryMask::empty(w, h);
    };
    let raw = BinaryMask {
        width: w,
        height: h,
        bits: gray
            .pixels()
            .iter()
            .enumerate()
            .map(|(i, &v)| v <= t && inside(i))
            .collect(),
    };
    let cleaned = morph_close(&morph_open(&raw, params), params);
    let min_area = params.min_component_area_frac * (w as f64 * h as f64);
    let mut out = BinaryMask::empty(w, h);
    for comp in connected_components(&cleaned) {
        if comp.area as f64 >= min_area {
            for (x, y) in comp.pixels {
                let i = y as usize * w as usize + x as usize;
                out.bits[i] = inside(i);
            }
        }
    }
    out
}
