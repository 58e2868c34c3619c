//! Synthetic images: textured patches drawn at projected landmark positions.

use image::{GrayImage, Luma};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mix_seed;
use super::observe::{view_angle, ObserveConfig};
use super::world::World;
use crate::camera::{Camera, CameraModel};
use crate::geom::SE3;

/// Side of a patch's texture grid.
const TEXTURE_CELLS: usize = 3;

/// Renders the view from a world-from-camera pose. Pixels outside the
/// camera's valid region are black; the background is a faint noise field.
pub fn render_frame(world: &World, pose: &SE3, camera: &Camera, config: &ObserveConfig, frame_seed: u64) -> GrayImage {
    let (w, h) = (camera.width(), camera.height());
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
    let mut img = GrayImage::from_fn(w, h, |x, y| {
        let in_view = camera.pixel_in_view(&Vector2::new(x as f64, y as f64));
        Luma([if in_view { 110 + rng.random_range(0..8u8) } else { 0 }])
    });
    let center = *pose.translation();
    let inv = pose.inverse();
    let mut patches = Vec::new();
    for l in world.near(&center, config.max_range) {
        if view_angle(l, &center).is_none() {
            continue;
        }
        let pc = inv.transform_point(&l.position);
        let Ok(proj) = camera.project(&pc) else { continue };
        if !proj.valid {
            continue;
        }
        patches.push((pc.norm(), proj.pixel, l.texture_seed));
    }
    // Far to near, so nearer patches cover farther ones.
    patches.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (range, pixel, seed) in patches {
        let half = (24.0 / range).clamp(3.0, 9.0);
        let mut trng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7e7));
        let shades: Vec<u8> = (0..TEXTURE_CELLS * TEXTURE_CELLS)
            .map(|_| if trng.random_bool(0.5) { trng.random_range(0..60) } else { trng.random_range(190..=255) })
            .collect();
        let (x0, x1) = ((pixel.x - half).round() as i64, (pixel.x + half).round() as i64);
        let (y0, y1) = ((pixel.y - half).round() as i64, (pixel.y + half).round() as i64);
        for y in y0.max(0)..=y1.min(h as i64 - 1) {
            for x in x0.max(0)..=x1.min(w as i64 - 1) {
                if !camera.pixel_in_view(&Vector2::new(x as f64, y as f64)) {
                    continue;
                }
                let cx = (((x - x0) as f64 / (x1 - x0 + 1) as f64) * TEXTURE_CELLS as f64) as usize;
                let cy = (((y - y0) as f64 / (y1 - y0 + 1) as f64) * TEXTURE_CELLS as f64) as usize;
                let v = shades[cy.min(TEXTURE_CELLS - 1) * TEXTURE_CELLS + cx.min(TEXTURE_CELLS - 1)];
                img.put_pixel(x as u32, y as u32, Luma([v]));
            }
        }
    }
    img
}
