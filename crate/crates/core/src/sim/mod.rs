//! Synthetic worlds, ground-truth paths, drifting odometry and observations.

mod observe;
mod odometry;
mod path;
mod render;
mod world;

pub use observe::{
    add_descriptor_noise, observe, view_angle, view_descriptor, visible_landmarks, ObserveConfig, SimObservation,
};
pub use odometry::{chain, corrupt_odometry, relative_motions, NoiseConfig};
pub use path::{camera_height, pose_at, sample, waypoints, PathType, Polyline};
pub use render::render_frame;
pub use world::{prototypes, Landmark, World, WorldConfig, MAX_VIEW_BITS};

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::camera::Camera;
use crate::eval::Trajectory;
use crate::geom::SE3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationMode {
    /// Landmark bearings and descriptors straight from the simulator.
    Abstract,
    /// Images rendered and run through corner detection.
    Rendered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub path: PathType,
    /// Total path length (m).
    pub length: f64,
    /// Distance between consecutive keyframes (m). Time advances 1 s per
    /// metre.
    pub keyframe_spacing: f64,
    pub noise: NoiseConfig,
    /// Descriptor bits flipped per observation.
    pub noise_bits: usize,
    pub mode: ObservationMode,
    pub camera: Camera,
    pub world: WorldConfig,
    pub observe: ObserveConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            path: PathType::LoopSameDirection,
            length: 200.0,
            keyframe_spacing: 1.0,
            noise: NoiseConfig::default(),
            noise_bits: 8,
            mode: ObservationMode::Abstract,
            camera: Camera::Panoramic(Default::default()),
            world: WorldConfig::default(),
            observe: ObserveConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scenario: {0}")]
    Json(#[from] serde_json::Error),
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let n = &self.noise;
        let checks = [
            (self.length > 0.0, "length must be positive"),
            (self.keyframe_spacing > 0.0, "keyframe_spacing must be positive"),
            (n.rotation_deg >= 0.0, "noise.rotation_deg must be non-negative"),
            (n.translation_pct >= 0.0, "noise.translation_pct must be non-negative"),
            (n.scale_drift_pct >= 0.0, "noise.scale_drift_pct must be non-negative"),
            (self.noise_bits <= 256, "noise_bits must be at most 256"),
            (self.world.density_per_m > 0.0, "world.density_per_m must be positive"),
            (
                self.world.lateral_min > 0.0 && self.world.lateral_min <= self.world.lateral_max,
                "world lateral range is empty",
            ),
            (self.world.height_min <= self.world.height_max, "world height range is empty"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(SimError::Invalid((*msg).into())),
            None => Ok(()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let c: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        c.validate()?;
        Ok(c)
    }
}

/// A generated world with its ground-truth keyframe trajectory.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub path: Polyline,
    pub world: World,
    pub ground_truth: Trajectory,
}

/// Builds the path, landmark field and ground truth. Deterministic in
/// `(config, seed)`.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Scenario, SimError> {
    config.validate()?;
    let path = Polyline::new(waypoints(config.path, config.length));
    let world = World::generate(&path, &config.world, mix_seed(seed, 1));
    let poses = sample(&path, config.keyframe_spacing);
    let ground_truth = Trajectory::new(
        poses
            .into_iter()
            .enumerate()
            .map(|(k, p)| (k as f64 * config.keyframe_spacing, p))
            .collect(),
    )
    .expect("increasing timestamps");
    Ok(Scenario {
        config: config.clone(),
        seed,
        path,
        world,
        ground_truth,
    })
}

impl Scenario {
    /// Seed for per-frame noise of keyframe `k`.
    pub fn frame_seed(&self, k: usize) -> u64 {
        mix_seed(mix_seed(self.seed, 2), k as u64)
    }

    pub fn odometry_seed(&self) -> u64 {
        mix_seed(self.seed, 3)
    }

    pub fn observe(&self, k: usize) -> Vec<SimObservation> {
        let (_, pose) = self.ground_truth.entries()[k];
        self.observe_from(&pose, self.frame_seed(k))
    }

    /// Observes the world from an arbitrary world-from-camera pose with the
    /// given noise seed.
    pub fn observe_from(&self, pose: &SE3, seed: u64) -> Vec<SimObservation> {
        observe(
            &self.world,
            pose,
            &self.config.camera,
            &self.config.observe,
            self.config.noise_bits,
            seed,
        )
    }
}

/// SplitMix64 finalizer over a pair, for deriving independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
