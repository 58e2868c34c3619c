use image::GrayImage;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::Keypoint;

/// Regular pixel grid with per-cell occupancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    cell_size: u32,
    cols: u32,
    rows: u32,
    occupied: Vec<bool>,
}

impl Grid {
    pub fn new(width: u32, height: u32, cell_size: u32) -> Self {
        let cell_size = cell_size.max(1);
        let cols = width.div_ceil(cell_size);
        let rows = height.div_ceil(cell_size);
        Grid {
            cell_size,
            cols,
            rows,
            occupied: vec![false; (cols * rows) as usize],
        }
    }

    pub fn cell_size(&self) -> u32 {
        self.cell_size
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.cols, self.rows)
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    /// `(col, row)` of the cell holding the pixel, if it is on the grid.
    pub fn cell_coords(&self, p: &Vector2<f64>) -> Option<(u32, u32)> {
        let x = (p.x + 0.5).floor();
        let y = (p.y + 0.5).floor();
        if x < 0.0 || y < 0.0 {
            return None;
        }
        let (c, r) = (x as u32 / self.cell_size, y as u32 / self.cell_size);
        (c < self.cols && r < self.rows).then_some((c, r))
    }

    pub fn cell_of(&self, p: &Vector2<f64>) -> Option<usize> {
        self.cell_coords(p).map(|(c, r)| (r * self.cols + c) as usize)
    }

    pub fn index(&self, col: u32, row: u32) -> usize {
        (row * self.cols + col) as usize
    }

    pub fn is_occupied(&self, cell: usize) -> bool {
        self.occupied[cell]
    }

    pub fn occupy(&mut self, cell: usize) {
        self.occupied[cell] = true;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Pixel bounds `[x0, x1) × [y0, y1)` of a cell, clipped to the image.
    fn bounds(&self, cell: usize, width: u32, height: u32) -> (u32, u32, u32, u32) {
        let (c, r) = (cell as u32 % self.cols, cell as u32 / self.cols);
        let x0 = c * self.cell_size;
        let y0 = r * self.cell_size;
        (x0, (x0 + self.cell_size).min(width), y0, (y0 + self.cell_size).min(height))
    }
}

/// Output of the hybrid selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Indices into the input corner list, one per occupied cell, in cell order.
    pub corner_indices: Vec<usize>,
    pub supplements: Vec<Keypoint>,
    pub grid: Grid,
}

impl Selection {
    /// Selected corner features followed by gradient supplements.
    pub fn keypoints(&self, corners: &[Keypoint]) -> Vec<Keypoint> {
        self.corner_indices
            .iter()
            .map(|&i| corners[i])
            .chain(self.supplements.iter().copied())
            .collect()
    }
}

/// Central-difference gradient magnitude in intensity levels per pixel.
pub fn gradient_magnitude(img: &GrayImage, x: u32, y: u32) -> f64 {
    if x == 0 || y == 0 || x + 1 >= img.width() || y + 1 >= img.height() {
        return 0.0;
    }
    let g = |x: u32, y: u32| img.get_pixel(x, y)[0] as f64;
    let gx = (g(x + 1, y) - g(x - 1, y)) / 2.0;
    let gy = (g(x, y + 1) - g(x, y - 1)) / 2.0;
    (gx * gx + gy * gy).sqrt()
}

/// Minimum absolute gradient magnitude for a supplementary keypoint.
const MIN_GRADIENT_FLOOR: f64 = 10.0;

/// Picks at most one keypoint per grid cell. A cell holding any corner takes
/// its highest-response corner (ties: lowest row, then column). An empty cell
/// takes its highest-gradient in-view pixel, provided an image is given and the
/// magnitude exceeds `max(10, 75th percentile of per-cell maximum gradients)`.
pub fn hybrid_select(
    corners: &[Keypoint],
    image: Option<&GrayImage>,
    grid: &Grid,
    in_view: &dyn Fn(&Vector2<f64>) -> bool,
) -> Selection {
    let mut grid = grid.clone();
    grid.occupied.iter_mut().for_each(|o| *o = false);

    let mut best: Vec<Option<usize>> = vec![None; grid.len()];
    for (i, kp) in corners.iter().enumerate() {
        if !in_view(&kp.position) {
            continue;
        }
        let Some(cell) = grid.cell_of(&kp.position) else {
            continue;
        };
        let better = match best[cell] {
            None => true,
            Some(j) => {
                let (a, b) = (kp, &corners[j]);
                a.score > b.score
                    || (a.score == b.score
                        && (a.position.y, a.position.x) < (b.position.y, b.position.x))
            }
        };
        if better {
            best[cell] = Some(i);
        }
    }
    let mut corner_indices = Vec::new();
    for (cell, b) in best.iter().enumerate() {
        if let Some(i) = b {
            corner_indices.push(*i);
            grid.occupy(cell);
        }
    }

    let mut supplements = Vec::new();
    if let Some(img) = image {
        let (w, h) = img.dimensions();
        // Per-cell gradient peak over in-view pixels.
        let peaks: Vec<Option<(f64, u32, u32)>> = (0..grid.len())
            .map(|cell| {
                let (x0, x1, y0, y1) = grid.bounds(cell, w, h);
                let mut peak: Option<(f64, u32, u32)> = None;
                for y in y0..y1 {
                    for x in x0..x1 {
                        if !in_view(&Vector2::new(x as f64, y as f64)) {
                            continue;
                        }
                        let m = gradient_magnitude(img, x, y);
                        if peak.is_none_or(|p| m > p.0) {
                            peak = Some((m, x, y));
                        }
                    }
                }
                peak
            })
            .collect();
        let mut mags: Vec<f64> = peaks.iter().flatten().map(|p| p.0).collect();
        let floor = if mags.is_empty() {
            MIN_GRADIENT_FLOOR
        } else {
            mags.sort_by(f64::total_cmp);
            let idx = ((mags.len() - 1) as f64 * 0.75).round() as usize;
            mags[idx].max(MIN_GRADIENT_FLOOR)
        };
        for (cell, peak) in peaks.iter().enumerate() {
            if grid.is_occupied(cell) {
                continue;
            }
            if let Some((m, x, y)) = *peak {
                if m > floor {
                    supplements.push(Keypoint::supplement(Vector2::new(x as f64, y as f64), m));
                    grid.occupy(cell);
                }
            }
        }
    }

    Selection {
        corner_indices,
        supplements,
        grid,
    }
}
