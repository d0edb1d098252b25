use crate::raster::{hsv_to_rgb, rgb_to_hsv, Raster};

/// Rotate every pixel's hue by `delta` half-degree units (mod 180); saturation
/// and value are left alone.
pub fn hue_shift(img: &Raster, delta: f32) -> Raster {
    let mut out = img.clone();
    for px in out.pixels_mut() {
        let hsv = rgb_to_hsv(*px);
        if hsv.s == 0 {
            continue;
        }
        *px = hsv_to_rgb(hsv.shift_hue(delta));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{mean_abs_error, HsvPixel};

    #[test]
    fn wraps_modulo_180() {
        let px = hsv_to_rgb(HsvPixel { h: 178.0, s: 255, v: 255 });
        let img = Raster::filled(4, 4, px);
        let out = hue_shift(&img, 5.0);
        for &p in out.pixels() {
            let h = rgb_to_hsv(p).h;
            assert!((h - 3.0).abs() < 0.5, "hue {h}");
        }
    }

    #[test]
    fn zero_shift_is_near_identity() {
        let img = Raster::from_fn(16, 16, |x, y| [(x * 16) as u8, (y * 16) as u8, 77]);
        assert!(mean_abs_error(&img, &hue_shift(&img, 0.0)).unwrap() <= 1.0);
    }

    #[test]
    fn gray_is_unaffected() {
        let img = Raster::from_fn(8, 8, |x, y| [((x + y) * 15) as u8; 3]);
        for d in [5.0, 10.0, 90.0, 175.0] {
            assert!(mean_abs_error(&img, &hue_shift(&img, d)).unwrap() <= 1.0);
        }
    }

    #[test]
    fn inverse_shift_restores() {
        let img = Raster::from_fn(16, 16, |x, y| [(x * 16) as u8, (y * 16) as u8, 140]);
        let back = hue_shift(&hue_shift(&img, 5.0), 175.0);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            for c in 0..3 {
                assert!((a[c] as i32 - b[c] as i32).abs() <= 1, "{a:?} vs {b:?}");
            }
        }
    }
}
