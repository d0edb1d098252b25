//! 8-bit RGB rasters plus the color-space and distance primitives that every
//! operator builds on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

/// Row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "raster dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidParameter(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        assert!(width > 0 && height > 0, "raster must be at least 1x1");
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Self {
        assert!(width > 0 && height > 0, "raster must be at least 1x1");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
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

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, px: Rgb) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = px;
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self::from_rgb_image(&img.to_rgb8()))
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
            |e| Error::Image {
                path: "<memory>".into(),
                message: e.to_string(),
            },
        )?;
        Ok(Self::from_rgb_image(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_rgb_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: "<memory>".into(),
                message: e.to_string(),
            })?;
        Ok(out.into_inner())
    }

    pub fn from_rgb_image(img: &image::RgbImage) -> Self {
        let pixels = img.pixels().map(|p| p.0).collect();
        Self {
            width: img.width(),
            height: img.height(),
            pixels,
        }
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width, self.height, raw)
            .expect("raster buffer length matches dimensions")
    }
}

/// Single-channel luma image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayRaster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayRaster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidParameter(format!(
                "gray raster {width}x{height} with {} pixels",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// HSV triple with hue in half-degree units.
///
/// Hue is kept fractional so that RGB -> HSV -> RGB stays within one level
/// per channel; shifting by whole hue units is still plain modular addition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsvPixel {
    /// `[0, 180)`
    pub h: f32,
    pub s: u8,
    pub v: u8,
}

impl HsvPixel {
    /// Returns the pixel with its hue rotated by `delta` units, modulo 180.
    pub fn shift_hue(self, delta: f32) -> Self {
        let mut h = (self.h + delta).rem_euclid(180.0);
        if h >= 180.0 {
            h = 0.0;
        }
        Self { h, ..self }
    }
}

/// Round half away from zero and clamp to the 8-bit range.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn luma(px: Rgb) -> u8 {
    to_u8(0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
}

pub fn to_grayscale(img: &Raster) -> GrayRaster {
    GrayRaster {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| luma(p)).collect(),
    }
}

pub fn rgb_to_hsv(px: Rgb) -> HsvPixel {
    let [r, g, b] = px.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max == 0.0 { 0 } else { to_u8(255.0 * delta / max) };
    let h = if delta == 0.0 {
        0.0
    } else {
        let degrees = if max == r {
            60.0 * (g - b) / delta
        } else if max == g {
            120.0 + 60.0 * (b - r) / delta
        } else {
            240.0 + 60.0 * (r - g) / delta
        };
        let half = degrees.rem_euclid(360.0) / 2.0;
        if half >= 180.0 {
            0.0
        } else {
            half
        }
    };
    HsvPixel {
        h: h as f32,
        s,
        v: max as u8,
    }
}

pub fn hsv_to_rgb(px: HsvPixel) -> Rgb {
    let v = px.v as f64;
    if px.s == 0 {
        return [px.v; 3];
    }
    let chroma = v * px.s as f64 / 255.0;
    let sector = (px.h as f64).rem_euclid(180.0) / 30.0;
    let x = chroma * (1.0 - ((sector % 2.0) - 1.0).abs());
    let m = v - chroma;
    let (r, g, b) = match sector as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    [to_u8(r + m), to_u8(g + m), to_u8(b + m)]
}

pub fn mean_abs_error(a: &Raster, b: &Raster) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dims(a.dims(), b.dims()));
    }
    let total: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| {
            (0..3)
                .map(|c| (p[c] as i32 - q[c] as i32).unsigned_abs() as u64)
                .sum::<u64>()
        })
        .sum();
    Ok(total as f64 / (a.pixels.len() * 3) as f64)
}

/// Bilinear sample at continuous pixel-center coordinates. Coordinates are
/// clamped to the image, so callers decide what "outside" means.
#[inline]
pub(crate) fn sample_bilinear(img: &Raster, x: f64, y: f64) -> [f64; 3] {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let (p00, p10, p01, p11) = (
        img.get(x0, y0),
        img.get(x1, y0),
        img.get(x0, y1),
        img.get(x1, y1),
    );
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

/// Bilinear resize using pixel-center alignment.
pub fn resize_bilinear(img: &Raster, width: u32, height: u32) -> Result<Raster> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "resize target must be at least 1x1, got {width}x{height}"
        )));
    }
    if img.dims() == (width, height) {
        return Ok(img.clone());
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    Ok(Raster::from_fn(width, height, |x, y| {
        let src_x = (x as f64 + 0.5) * sx - 0.5;
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        sample_bilinear(img, src_x, src_y).map(to_u8)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn grayscale_anchors() {
        let white = Raster::filled(3, 2, [255, 255, 255]);
        assert!(to_grayscale(&white).pixels().iter().all(|&v| v == 255));
        let black = Raster::filled(3, 2, [0, 0, 0]);
        assert!(to_grayscale(&black).pixels().iter().all(|&v| v == 0));
        // 0.299 * 255 = 76.245
        assert_eq!(luma([255, 0, 0]), 76);
    }

    #[test]
    fn hsv_anchors() {
        let red = rgb_to_hsv([255, 0, 0]);
        assert_eq!((red.h, red.s, red.v), (0.0, 255, 255));
        let gray = rgb_to_hsv([128, 128, 128]);
        assert_eq!((gray.h, gray.s, gray.v), (0.0, 0, 128));
        let green = rgb_to_hsv([0, 255, 0]);
        assert_eq!((green.h, green.s, green.v), (60.0, 255, 255));

        assert_eq!(hsv_to_rgb(HsvPixel { h: 0.0, s: 255, v: 255 }), [255, 0, 0]);
        assert_eq!(hsv_to_rgb(HsvPixel { h: 37.0, s: 0, v: 200 }), [200, 200, 200]);
    }

    #[test]
    fn hsv_round_trip_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let px: Rgb = [rng.random(), rng.random(), rng.random()];
            let back = hsv_to_rgb(rgb_to_hsv(px));
            for c in 0..3 {
                assert!(
                    (px[c] as i32 - back[c] as i32).abs() <= 1,
                    "{px:?} -> {back:?}"
                );
            }
        }
    }

    #[test]
    fn hue_shift_wraps() {
        let p = HsvPixel { h: 178.0, s: 200, v: 200 };
        assert_eq!(p.shift_hue(5.0).h, 3.0);
        assert_eq!(p.shift_hue(2.0).h, 0.0);
    }

    #[test]
    fn mae_cases() {
        let a = Raster::filled(4, 4, [10, 20, 30]);
        assert_eq!(mean_abs_error(&a, &a).unwrap(), 0.0);
        let zero = Raster::filled(4, 4, [0; 3]);
        let full = Raster::filled(4, 4, [255; 3]);
        assert_eq!(mean_abs_error(&zero, &full).unwrap(), 255.0);
        let half = Raster::from_fn(4, 4, |x, _| if x < 2 { [30; 3] } else { [0; 3] });
        assert_eq!(mean_abs_error(&zero, &half).unwrap(), 15.0);
        let small = Raster::filled(2, 4, [0; 3]);
        assert!(matches!(
            mean_abs_error(&zero, &small),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn resize_cases() {
        let img = Raster::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, 9]);
        let same = resize_bilinear(&img, 7, 5).unwrap();
        assert!(mean_abs_error(&img, &same).unwrap() <= 1.0);

        let flat = Raster::filled(5, 3, [12, 200, 77]);
        let big = resize_bilinear(&flat, 13, 9).unwrap();
        assert!(big.pixels().iter().all(|&p| p == [12, 200, 77]));

        let step = Raster::new(2, 1, vec![[0; 3], [255; 3]]).unwrap();
        let wide = resize_bilinear(&step, 4, 1).unwrap();
        // centers map to -0.25, 0.25, 0.75, 1.25 in source coordinates
        let row: Vec<u8> = wide.pixels().iter().map(|p| p[0]).collect();
        assert_eq!(row, vec![0, 64, 191, 255]);
        assert!(row.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn png_round_trip() {
        let img = Raster::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 70, 3]);
        let bytes = img.encode_png().unwrap();
        assert_eq!(Raster::decode_png(&bytes).unwrap(), img);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Raster::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![[0; 3]; 3]).is_err());
    }

    fn arb_raster(w: u32, h: u32) -> impl Strategy<Value = Raster> {
        proptest::collection::vec(any::<[u8; 3]>(), (w * h) as usize)
            .prop_map(move |px| Raster::new(w, h, px).unwrap())
    }

    proptest! {
        #[test]
        fn mae_is_a_metric(a in arb_raster(4, 3), b in arb_raster(4, 3), c in arb_raster(4, 3)) {
            let ab = mean_abs_error(&a, &b).unwrap();
            let ba = mean_abs_error(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab == 0.0, a == b);
            let ac = mean_abs_error(&a, &c).unwrap();
            let cb = mean_abs_error(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn grayscale_is_deterministic(a in arb_raster(5, 5)) {
            prop_assert_eq!(to_grayscale(&a), to_grayscale(&a));
        }
    }
}
