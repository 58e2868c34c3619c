//! Depth lookup for loop features from a keyframe's gridded map points.

use nalgebra::Vector2;

use crate::backend::DepthGrid;

/// Pixel-distance floor for the inverse-distance weights.
const MIN_PIXEL_DISTANCE: f64 = 1e-6;

/// Depth for a feature at `pixel`: the nearest map point in the same grid
/// cell if the cell has one, otherwise the inverse-pixel-distance weighted
/// mean over the surrounding 3×3 cells, otherwise `None`.
pub fn approximate_depth(grid: &DepthGrid, pixel: &Vector2<f64>) -> Option<f64> {
    let (col, row) = grid.grid().cell_coords(pixel)?;
    let same = grid.cell(col, row);
    if !same.is_empty() {
        let mut best = (f64::INFINITY, 0.0);
        for (p, d) in same {
            let dist = (p - pixel).norm();
            if dist < best.0 {
                best = (dist, *d);
            }
        }
        return Some(best.1);
    }
    let (cols, rows) = grid.grid().dims();
    let (mut wsum, mut dsum) = (0.0, 0.0);
    for r in row.saturating_sub(1)..=(row + 1).min(rows - 1) {
        for c in col.saturating_sub(1)..=(col + 1).min(cols - 1) {
            for (p, d) in grid.cell(c, r) {
                let w = 1.0 / (p - pixel).norm().max(MIN_PIXEL_DISTANCE);
                wsum += w;
                dsum += w * d;
            }
        }
    }
    (wsum > 0.0).then(|| dsum / wsum)
}
