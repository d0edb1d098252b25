use crate::error::{Error, Result};
use crate::raster::{to_u8, Raster};

/// Window diameter of the smooth operator.
pub const BILATERAL_DIAMETER: u32 = 9;

/// Edge-preserving bilateral filter over a circular window of diameter 9.
///
/// `sigma` is used for both the spatial and the color Gaussian; color
/// distance is Euclidean in RGB. Neighbors outside the image are skipped and
/// the remaining weights renormalized.
pub fn bilateral_smooth(img: &Raster, sigma: f64) -> Result<Raster> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bilateral sigma must be positive, got {sigma}"
        )));
    }
    let radius = (BILATERAL_DIAMETER / 2) as i64;
    let mut offsets = Vec::new();
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 <= (radius * radius) as f64 {
                offsets.push((dx, dy, (-d2 / (2.0 * sigma * sigma)).exp()));
            }
        }
    }
    // squared RGB distance is an integer in 0..=3*255^2
    let color_lut: Vec<f64> = (0..=3 * 255 * 255)
        .map(|d2| (-(d2 as f64) / (2.0 * sigma * sigma)).exp())
        .collect();

    let (w, h) = (img.width() as i64, img.height() as i64);
    let src = img.pixels();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let center = src[(y * w + x) as usize];
            let mut acc = [0.0f64; 3];
            let mut norm = 0.0;
            for &(dx, dy, ws) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let p = src[(ny * w + nx) as usize];
                let d2: i32 = (0..3)
                    .map(|c| {
                        let d = p[c] as i32 - center[c] as i32;
                        d * d
                    })
                    .sum();
                let wt = ws * color_lut[d2 as usize];
                norm += wt;
                for c in 0..3 {
                    acc[c] += wt * p[c] as f64;
                }
            }
            out.push(acc.map(|v| to_u8(v / norm)));
        }
    }
    Raster::new(img.width(), img.height(), out)
}
