use serde::{Deserialize, Serialize};

use crate::raster::{sample_bilinear, to_u8, Raster};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

pub fn flip(img: &Raster, axis: FlipAxis) -> Raster {
    let (w, h) = img.dims();
    Raster::from_fn(w, h, |x, y| match axis {
        FlipAxis::Horizontal => img.get(w - 1 - x, y),
        FlipAxis::Vertical => img.get(x, h - 1 - y),
    })
}

/// Rotate about the image center onto a canvas of the same size. Positive
/// angles turn the content counter-clockwise as displayed.
///
/// Multiples of 90 degrees are exact pixel moves (clipped on non-square
/// canvases); other angles are bilinear. Destination pixels whose source lies
/// outside the image are black.
pub fn rotate(img: &Raster, degrees: i32) -> Raster {
    let quarter = degrees.rem_euclid(360);
    if quarter % 90 == 0 {
        rotate_quarter(img, quarter / 90)
    } else {
        rotate_bilinear(img, degrees as f64)
    }
}

fn rotate_quarter(img: &Raster, turns: i32) -> Raster {
    let (w, h) = img.dims();
    let (wi, hi) = (w as i64, h as i64);
    if turns == 0 {
        return img.clone();
    }
    Raster::from_fn(w, h, |x, y| {
        let (x, y) = (x as i64, y as i64);
        // doubled center-relative coordinates keep odd sizes exact
        let (sx, sy) = match turns {
            1 => (
                (wi + hi - 2 - 2 * y).div_euclid(2),
                (2 * x + hi - wi).div_euclid(2),
            ),
            2 => (wi - 1 - x, hi - 1 - y),
            _ => (
                (2 * y + wi - hi).div_euclid(2),
                (wi + hi - 2 - 2 * x).div_euclid(2),
            ),
        };
        if sx >= 0 && sy >= 0 && sx < wi && sy < hi {
            img.get(sx as u32, sy as u32)
        } else {
            [0, 0, 0]
        }
    })
}

fn rotate_bilinear(img: &Raster, degrees: f64) -> Raster {
    let (w, h) = img.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let eps = 1e-9;
    let (max_x, max_y) = (w as f64 - 1.0 + eps, h as f64 - 1.0 + eps);
    Raster::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let sx = cx + dx * cos - dy * sin;
        let sy = cy + dx * sin + dy * cos;
        if sx < -eps || sy < -eps || sx > max_x || sy > max_y {
            [0, 0, 0]
        } else {
            sample_bilinear(img, sx, sy).map(to_u8)
        }
    })
}
