//! Landmark fields along a path, with appearance descriptors.

use nalgebra::{Vector2, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::path::Polyline;
use crate::features::Descriptor;
use crate::ids::LandmarkId;

/// Longest run of view-dependent bit flips.
pub const MAX_VIEW_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Landmarks per metre of corridor, both walls together.
    pub density_per_m: f64,
    /// Clearance: landmarks closer than this to any part of the path are
    /// dropped.
    pub lateral_min: f64,
    pub lateral_max: f64,
    /// Each side of a segment is lined with wall sections of random length
    /// in this range (m), each at its own distance from the path.
    pub wall_section: (f64, f64),
    /// Smallest wall distance; the largest is `lateral_max`.
    pub wall_min: f64,
    /// Landmark offset from its wall plane, uniform in ± this (m).
    pub wall_jitter: f64,
    /// Landmark height range relative to the camera.
    pub height_min: f64,
    pub height_max: f64,
    /// Shared appearance vocabulary: number of prototype descriptors.
    pub prototypes: usize,
    /// Bits flipped from its prototype to make each landmark distinct.
    pub landmark_bits: usize,
    /// Seed of the prototype set. Fixed across worlds so a vocabulary
    /// trained in one world transfers to another.
    pub appearance_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            density_per_m: 80.0,
            lateral_min: 0.3,
            lateral_max: 5.0,
            wall_section: (4.0, 12.0),
            wall_min: 1.0,
            wall_jitter: 0.1,
            height_min: 0.1,
            height_max: 3.5,
            prototypes: 1024,
            landmark_bits: 24,
            appearance_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: LandmarkId,
    pub position: Vector3<f64>,
    /// Horizontal unit normal of the wall, facing the corridor.
    pub normal: Vector2<f64>,
    pub descriptor: Descriptor,
    /// Intrinsic corner strength in (0, 1].
    pub strength: f64,
    /// Bits flipped as the viewing angle grows, one order per side of the
    /// wall normal.
    pub view_bits: [[u8; MAX_VIEW_BITS]; 2],
    pub texture_seed: u64,
}

#[derive(Debug, Clone)]
pub struct World {
    pub landmarks: Vec<Landmark>,
    pub config: WorldConfig,
    cell: f64,
    index: HashMap<(i64, i64), Vec<u32>>,
}

/// Prototype descriptors shared by every world with the same seed.
pub fn prototypes(count: usize, seed: u64) -> Vec<Descriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Descriptor::random(&mut rng)).collect()
}

const INDEX_CELL: f64 = 4.0;

impl World {
    /// Lines both sides of every path segment with wall sections and
    /// scatters landmarks on them (segments retraced by the path are
    /// populated once). Landmarks closer than `lateral_min` to any part of
    /// the path are dropped.
    pub fn generate(line: &Polyline, config: &WorldConfig, seed: u64) -> World {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let protos = prototypes(config.prototypes.max(1), config.appearance_seed);
        let mut segments: Vec<(Vector2<f64>, Vector2<f64>)> = Vec::new();
        for (a, b) in line.segments() {
            let seen = segments.iter().any(|&(c, d)| {
                ((a - c).norm() < 1e-9 && (b - d).norm() < 1e-9) || ((a - d).norm() < 1e-9 && (b - c).norm() < 1e-9)
            });
            if !seen && (b - a).norm() > 0.0 {
                segments.push((a, b));
            }
        }
        let mut landmarks = Vec::new();
        for (a, b) in segments {
            let len = (b - a).norm();
            let dir = (b - a) / len;
            let left = Vector2::new(-dir.y, dir.x);
            let ext = config.lateral_max;
            // Wall sections per side: (start, end, distance).
            let walls: [Vec<(f64, f64, f64)>; 2] = std::array::from_fn(|_| {
                let mut out = Vec::new();
                let mut s0 = -ext;
                while s0 < len + ext {
                    let l = rng.random_range(config.wall_section.0..=config.wall_section.1.max(config.wall_section.0));
                    let d = rng.random_range(config.wall_min.min(config.lateral_max)..=config.lateral_max);
                    out.push((s0, s0 + l, d));
                    s0 += l;
                }
                out
            });
            let count = (config.density_per_m * (len + 2.0 * ext)).round() as usize;
            for _ in 0..count {
                let s = rng.random_range(-ext..len + ext);
                let side_idx = usize::from(rng.random_bool(0.5));
                let side = if side_idx == 1 { 1.0 } else { -1.0 };
                let wall = walls[side_idx]
                    .iter()
                    .find(|w| s < w.1)
                    .unwrap_or_else(|| walls[side_idx].last().expect("at least one section"));
                let jitter = rng.random_range(-config.wall_jitter..=config.wall_jitter);
                let lateral = (wall.2 + jitter).clamp(config.lateral_min, config.lateral_max);
                let z = rng.random_range(config.height_min..=config.height_max);
                let ground = a + dir * s + left * (side * lateral);
                let proto = protos[rng.random_range(0..protos.len())];
                let strength = rng.random_range(0.2..=1.0);
                let mut descriptor = proto;
                for bit in sample(&mut rng, 256, config.landmark_bits.min(256)) {
                    descriptor.flip_bit(bit);
                }
                let mut view_bits = [[0u8; MAX_VIEW_BITS]; 2];
                for side_bits in &mut view_bits {
                    for (slot, bit) in side_bits.iter_mut().zip(sample(&mut rng, 256, MAX_VIEW_BITS)) {
                        *slot = bit as u8;
                    }
                }
                let texture_seed = rng.random();
                if line.distance(&ground) < config.lateral_min {
                    continue;
                }
                landmarks.push(Landmark {
                    id: LandmarkId(landmarks.len() as u32),
                    position: Vector3::new(ground.x, ground.y, z),
                    normal: left * -side,
                    descriptor,
                    strength,
                    view_bits,
                    texture_seed,
                });
            }
        }
        let mut index: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for l in &landmarks {
            index.entry(cell_key(&l.position, INDEX_CELL)).or_default().push(l.id.0);
        }
        World {
            landmarks,
            config: config.clone(),
            cell: INDEX_CELL,
            index,
        }
    }

    pub fn landmark(&self, id: LandmarkId) -> &Landmark {
        &self.landmarks[id.0 as usize]
    }

    /// Landmarks within horizontal distance `radius` of `center`, by id.
    pub fn near(&self, center: &Vector3<f64>, radius: f64) -> Vec<&Landmark> {
        let (cx, cy) = cell_key(center, self.cell);
        let r = (radius / self.cell).ceil() as i64;
        let mut out = Vec::new();
        for i in cx - r..=cx + r {
            for j in cy - r..=cy + r {
                for &id in self.index.get(&(i, j)).into_iter().flatten() {
                    let l = &self.landmarks[id as usize];
                    if (l.position.xy() - center.xy()).norm() <= radius {
                        out.push(l);
                    }
                }
            }
        }
        out.sort_by_key(|l| l.id);
        out
    }
}

fn cell_key(p: &Vector3<f64>, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}
