use image::GrayImage;
use imageproc::corners::corners_fast9;
use imageproc::filter::gaussian_blur_f32;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::pattern::PATTERN;
use super::{Descriptor, Keypoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    /// FAST segment-test intensity threshold.
    pub fast_threshold: u8,
    pub harris_k: f64,
    /// Half-width of the Harris structure-tensor window.
    pub harris_radius: i32,
    pub orientation_radius: i32,
    pub blur_sigma: f32,
    /// Corners closer than this to the image edge are discarded so the rotated
    /// pattern and orientation patch stay inside the image.
    pub border: u32,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            fast_threshold: 20,
            harris_k: 0.04,
            harris_radius: 3,
            orientation_radius: 15,
            blur_sigma: 2.0,
            border: 19,
        }
    }
}

/// A detected corner with its descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: Descriptor,
}

pub fn detect_corners(image: &GrayImage, n_target: usize) -> Vec<Feature> {
    detect_corners_with(image, n_target, &DetectorParams::default(), &|_| true)
}

/// FAST-9 segment test, 3×3 non-maximum suppression on the FAST score, Harris
/// response ranking (positive responses only), intensity-centroid orientation
/// and a 256-bit rotated binary descriptor sampled on a Gaussian-blurred copy.
/// Returns at most `n_target` corners ordered by decreasing response, ties by
/// row then column.
pub fn detect_corners_with(
    image: &GrayImage,
    n_target: usize,
    params: &DetectorParams,
    in_view: &dyn Fn(&Vector2<f64>) -> bool,
) -> Vec<Feature> {
    let (w, h) = image.dimensions();
    let b = params.border;
    if n_target == 0 || w <= 2 * b || h <= 2 * b {
        return Vec::new();
    }
    let raw = corners_fast9(image, params.fast_threshold);
    let fast_score: HashMap<(u32, u32), f32> = raw.iter().map(|c| ((c.x, c.y), c.score)).collect();

    let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
    for c in &raw {
        if c.x < b || c.y < b || c.x >= w - b || c.y >= h - b {
            continue;
        }
        if !in_view(&Vector2::new(c.x as f64, c.y as f64)) {
            continue;
        }
        let dominated = (-1i32..=1).any(|dy| {
            (-1i32..=1).any(|dx| {
                if dx == 0 && dy == 0 {
                    return false;
                }
                let key = ((c.x as i32 + dx) as u32, (c.y as i32 + dy) as u32);
                match fast_score.get(&key) {
                    Some(&s) => s > c.score || (s == c.score && (dy < 0 || (dy == 0 && dx < 0))),
                    None => false,
                }
            })
        });
        if dominated {
            continue;
        }
        let r = harris_response(image, c.x, c.y, params.harris_radius, params.harris_k);
        if r > 0.0 {
            candidates.push((r, c.y, c.x));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    candidates.truncate(n_target);
    if candidates.is_empty() {
        return Vec::new();
    }

    let blurred = gaussian_blur_f32(image, params.blur_sigma);
    candidates
        .into_iter()
        .map(|(score, y, x)| {
            let angle = intensity_centroid_angle(image, x, y, params.orientation_radius);
            Feature {
                keypoint: Keypoint::corner(Vector2::new(x as f64, y as f64), score, angle),
                descriptor: rotated_brief(&blurred, x, y, angle),
            }
        })
        .collect()
}

/// Harris corner response `det(M) − k·tr(M)²` of the Sobel structure tensor
/// over a `(2r+1)²` window, with intensities scaled to [0, 1].
fn harris_response(img: &GrayImage, x: u32, y: u32, r: i32, k: f64) -> f64 {
    let g = |x: i32, y: i32| img.get_pixel(x as u32, y as u32)[0] as f64 / 255.0;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            let (px, py) = (x as i32 + dx, y as i32 + dy);
            let ix = (g(px + 1, py - 1) + 2.0 * g(px + 1, py) + g(px + 1, py + 1)
                - g(px - 1, py - 1)
                - 2.0 * g(px - 1, py)
                - g(px - 1, py + 1))
                / 8.0;
            let iy = (g(px - 1, py + 1) + 2.0 * g(px, py + 1) + g(px + 1, py + 1)
                - g(px - 1, py - 1)
                - 2.0 * g(px, py - 1)
                - g(px + 1, py - 1))
                / 8.0;
            sxx += ix * ix;
            syy += iy * iy;
            sxy += ix * iy;
        }
    }
    let tr = sxx + syy;
    sxx * syy - sxy * sxy - k * tr * tr
}

fn intensity_centroid_angle(img: &GrayImage, x: u32, y: u32, radius: i32) -> f64 {
    let (mut m10, mut m01) = (0.0, 0.0);
    let r2 = radius * radius;
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy > r2 {
                continue;
            }
            let v = img.get_pixel((x as i32 + dx) as u32, (y as i32 + dy) as u32)[0] as f64;
            m10 += dx as f64 * v;
            m01 += dy as f64 * v;
        }
    }
    m01.atan2(m10)
}

fn rotated_brief(img: &GrayImage, x: u32, y: u32, angle: f64) -> Descriptor {
    let (s, c) = angle.sin_cos();
    let sample = |px: i8, py: i8| {
        let (px, py) = (px as f64, py as f64);
        let u = (x as f64 + c * px - s * py).round() as u32;
        let v = (y as f64 + s * px + c * py).round() as u32;
        img.get_pixel(u, v)[0]
    };
    let mut d = Descriptor::zero();
    for (i, p) in PATTERN.iter().enumerate() {
        if sample(p[0], p[1]) < sample(p[2], p[3]) {
            d.set_bit(i, true);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{imageops, Luma};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dark background with `n` bright squares of side 9 on a jittered lattice.
    fn blob_image(n: usize, seed: u64) -> (GrayImage, Vec<(u32, u32)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = GrayImage::from_pixel(400, 400, Luma([30]));
        let mut origins = Vec::new();
        for i in 0..n {
            let (gx, gy) = ((i % 8) as u32, (i / 8) as u32);
            let ox = 30 + gx * 45 + rng.random_range(0..8);
            let oy = 30 + gy * 45 + rng.random_range(0..8);
            for y in oy..oy + 9 {
                for x in ox..ox + 9 {
                    img.put_pixel(x, y, Luma([220]));
                }
            }
            origins.push((ox, oy));
        }
        (img, origins)
    }

    fn textured(seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = GrayImage::from_pixel(240, 240, Luma([128]));
        for _ in 0..120 {
            let (cx, cy) = (rng.random_range(0..240i32), rng.random_range(0..240i32));
            let (hw, hh) = (rng.random_range(2..10), rng.random_range(2..10));
            let v = rng.random_range(0..=255u8);
            for y in (cy - hh).max(0)..(cy + hh).min(240) {
                for x in (cx - hw).max(0)..(cx + hw).min(240) {
                    img.put_pixel(x as u32, y as u32, Luma([v]));
                }
            }
        }
        img
    }

    #[test]
    fn flat_image_has_no_corners() {
        let img = GrayImage::from_pixel(200, 200, Luma([90]));
        assert!(detect_corners(&img, 500).is_empty());
    }

    #[test]
    fn finds_blob_corners() {
        let (img, origins) = blob_image(50, 4);
        let found = detect_corners(&img, 1000);
        let hit = origins
            .iter()
            .filter(|&&(ox, oy)| {
                let corners = [(ox, oy), (ox + 8, oy), (ox, oy + 8), (ox + 8, oy + 8)];
                corners.iter().any(|&(cx, cy)| {
                    found.iter().any(|f| {
                        (f.keypoint.position - Vector2::new(cx as f64, cy as f64)).norm() <= 2.0
                    })
                })
            })
            .count();
        assert!(hit >= 45, "{hit} of 50 blobs detected");
        assert!(found.iter().all(|f| f.keypoint.score >= 0.0));
    }

    #[test]
    fn respects_target_count_and_order() {
        let img = textured(1);
        let all = detect_corners(&img, 10_000);
        let few = detect_corners(&img, 10);
        assert!(all.len() > 10);
        assert_eq!(few.len(), 10);
        assert_eq!(&all[..10], &few[..]);
        assert!(all.windows(2).all(|w| w[0].keypoint.score >= w[1].keypoint.score));
    }

    #[test]
    fn descriptors_survive_rotation() {
        let img = textured(2);
        let rotated = imageops::rotate90(&img);
        let a = detect_corners(&img, 200);
        let b = detect_corners(&rotated, 400);
        // rotate90 maps (x, y) to (h − 1 − y, x).
        let mut checked = 0;
        let mut close = 0;
        for f in &a {
            let p = f.keypoint.position;
            let q = Vector2::new(239.0 - p.y, p.x);
            if let Some(g) = b.iter().find(|g| (g.keypoint.position - q).norm() < 0.5) {
                checked += 1;
                if f.descriptor.hamming(&g.descriptor) <= 40 {
                    close += 1;
                }
            }
        }
        assert!(checked >= 20, "only {checked} corresponding corners");
        assert!(close as f64 >= 0.9 * checked as f64, "{close}/{checked}");
    }
}
