use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{to_u8, Raster};
use crate::segment::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Groove,
    Surface,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovalOutcome {
    pub image: Raster,
    /// Set when nothing was left to take the fill color from; the image is
    /// returned unmodified in that case.
    pub degenerate: bool,
}

/// Replace the selected region with the per-channel mean color of the rest of
/// the image. The groove region is `mask`, the surface region its complement.
pub fn remove_region(img: &Raster, mask: &BinaryMask, which: Region) -> Result<RemovalOutcome> {
    remove_region_within(img, mask, None, which)
}

/// [`remove_region`] confined to `footprint`: pixels outside it are neither
/// replaced nor counted towards the fill color.
pub fn remove_region_within(
    img: &Raster,
    mask: &BinaryMask,
    footprint: Option<&BinaryMask>,
    which: Region,
) -> Result<RemovalOutcome> {
    if img.dims() != mask.dims() {
        return Err(Error::dims(img.dims(), mask.dims()));
    }
    if let Some(f) = footprint {
        if f.dims() != img.dims() {
            return Err(Error::dims(img.dims(), f.dims()));
        }
    }
    let inside = |i: usize| footprint.map_or(true, |f| f.bits()[i]);
    let removed = |bit: bool| match which {
        Region::Groove => bit,
        Region::Surface => !bit,
    };
    let mut sum = [0u64; 3];
    let mut kept = 0u64;
    for (i, (px, &bit)) in img.pixels().iter().zip(mask.bits()).enumerate() {
        if inside(i) && !removed(bit) {
            kept += 1;
            for c in 0..3 {
                sum[c] += px[c] as u64;
            }
        }
    }
    if kept == 0 {
        return Ok(RemovalOutcome {
            image: img.clone(),
            degenerate: true,
        });
    }
    let fill = sum.map(|s| to_u8(s as f64 / kept as f64));
    let mut out = img.clone();
    for (i, (px, &bit)) in out.pixels_mut().iter_mut().zip(mask.bits()).enumerate() {
        if inside(i) && removed(bit) {
            *px = fill;
        }
    }
    Ok(RemovalOutcome {
        image: out,
        degenerate: false,
    })
}
