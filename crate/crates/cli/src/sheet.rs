use opexplain::raster::{resize_bilinear, Raster};

const GAP: u32 = 4;
const MAX_TILE: u32 = 256;

/// Grid of equally sized tiles, row-major, separated by white gaps. Tiles
/// larger than 256 px on their long side are scaled down.
pub fn contact_sheet(tiles: &[Raster]) -> opexplain::Result<Raster> {
    let Some(first) = tiles.first() else {
        return Ok(Raster::filled(1, 1, [255; 3]));
    };
    let (w, h) = first.dims();
    let scale = (MAX_TILE as f64 / w.max(h) as f64).min(1.0);
    let (tw, th) = (
        ((w as f64 * scale).round() as u32).max(1),
        ((h as f64 * scale).round() as u32).max(1),
    );
    let cols = (tiles.len() as f64).sqrt().ceil() as u32;
    let rows = (tiles.len() as u32).div_ceil(cols);
    let mut sheet = Raster::filled(
        cols * tw + (cols + 1) * GAP,
        rows * th + (rows + 1) * GAP,
        [255; 3],
    );
    for (i, tile) in tiles.iter().enumerate() {
        let tile = if tile.dims() == (tw, th) {
            tile.clone()
        } else {
            resize_bilinear(tile, tw, th)?
        };
        let (c, r) = (i as u32 % cols, i as u32 / cols);
        let (x0, y0) = (GAP + c * (tw + GAP), GAP + r * (th + GAP));
        for y in 0..th {
            for x in 0..tw {
                sheet.set(x0 + x, y0 + y, tile.get(x, y));
            }
        }
    }
    Ok(sheet)
}
