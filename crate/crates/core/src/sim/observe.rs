//! Landmark observations from a camera pose.

use nalgebra::{Vector2, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::mix_seed;
use super::world::{Landmark, World, MAX_VIEW_BITS};
use crate::camera::{Camera, CameraModel};
use crate::features::Descriptor;
use crate::geom::SE3;
use crate::ids::LandmarkId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserveConfig {
    /// Landmarks farther than this (horizontally) are never seen.
    pub max_range: f64,
    /// Standard deviation of pixel noise.
    pub pixel_noise: f64,
    /// Viewing-angle change that flips one more descriptor bit (degrees).
    pub view_step_deg: f64,
    /// Distance at which a corner's response halves.
    pub response_range: f64,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        ObserveConfig {
            max_range: 12.0,
            pixel_noise: 0.5,
            view_step_deg: 1.5,
            response_range: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimObservation {
    pub landmark: LandmarkId,
    pub pixel: Vector2<f64>,
    /// Unit bearing back-projected from the noisy pixel.
    pub bearing: Vector3<f64>,
    pub descriptor: Descriptor,
    pub response: f64,
    /// True distance from the camera centre.
    pub range: f64,
}

/// Signed horizontal angle between the wall normal and the direction to the
/// viewer, or `None` when viewed from behind the wall.
pub fn view_angle(l: &Landmark, viewer: &Vector3<f64>) -> Option<f64> {
    let v = viewer.xy() - l.position.xy();
    let along = l.normal.dot(&v);
    if along <= 0.0 {
        return None;
    }
    let cross = l.normal.x * v.y - l.normal.y * v.x;
    Some(cross.atan2(along))
}

/// Landmark descriptor as seen from `viewer`: the bits of one side's order
/// are flipped, one per `step_deg` of viewing angle.
pub fn view_descriptor(l: &Landmark, viewer: &Vector3<f64>, step_deg: f64) -> Option<Descriptor> {
    let phi = view_angle(l, viewer)?;
    let n = ((phi.abs().to_degrees() / step_deg).floor() as usize).min(MAX_VIEW_BITS);
    let order = &l.view_bits[usize::from(phi < 0.0)];
    let mut d = l.descriptor;
    for &b in &order[..n] {
        d.flip_bit(b as usize);
    }
    Some(d)
}

/// Flips `bits` distinct uniformly chosen bits.
pub fn add_descriptor_noise(d: &mut Descriptor, bits: usize, rng: &mut ChaCha8Rng) {
    for b in sample(rng, 256, bits.min(256)) {
        d.flip_bit(b);
    }
}

/// Noise-free visibility: landmarks in range, facing the camera and
/// projecting inside the image.
pub fn visible_landmarks(world: &World, pose: &SE3, camera: &Camera, max_range: f64) -> BTreeSet<LandmarkId> {
    let center = *pose.translation();
    let inv = pose.inverse();
    world
        .near(&center, max_range)
        .into_iter()
        .filter(|l| view_angle(l, &center).is_some())
        .filter(|l| camera.project(&inv.transform_point(&l.position)).is_ok_and(|p| p.valid))
        .map(|l| l.id)
        .collect()
}

/// Observes every visible landmark from the world-from-camera `pose`, with
/// pixel and descriptor noise drawn per (frame, landmark). Sorted by
/// decreasing response, ties by landmark id.
pub fn observe(
    world: &World,
    pose: &SE3,
    camera: &Camera,
    config: &ObserveConfig,
    noise_bits: usize,
    frame_seed: u64,
) -> Vec<SimObservation> {
    let center = *pose.translation();
    let inv = pose.inverse();
    let pixel_noise = Normal::new(0.0, config.pixel_noise.max(0.0)).expect("finite sigma");
    let mut out = Vec::new();
    for l in world.near(&center, config.max_range) {
        let Some(mut descriptor) = view_descriptor(l, &center, config.view_step_deg) else {
            continue;
        };
        let pc = inv.transform_point(&l.position);
        let Ok(proj) = camera.project(&pc) else { continue };
        if !proj.valid {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(frame_seed, l.id.0 as u64));
        let pixel = proj.pixel + Vector2::new(pixel_noise.sample(&mut rng), pixel_noise.sample(&mut rng));
        if !camera.pixel_in_view(&pixel) {
            continue;
        }
        let Ok(bearing) = camera.back_project(&pixel) else { continue };
        add_descriptor_noise(&mut descriptor, noise_bits, &mut rng);
        let range = pc.norm();
        out.push(SimObservation {
            landmark: l.id,
            pixel,
            bearing: bearing.normalize(),
            descriptor,
            response: l.strength / (1.0 + range / config.response_range),
            range,
        });
    }
    out.sort_by(|a, b| b.response.total_cmp(&a.response).then(a.landmark.cmp(&b.landmark)));
    out
}
