//! Drift-corrupted relative motion.

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eval::Trajectory;
use crate::geom::SE3;

/// Per-step odometry noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the rotation error about each axis (degrees).
    pub rotation_deg: f64,
    /// Standard deviation of each translation component, as a percentage of
    /// the step length.
    pub translation_pct: f64,
    /// Scale growth per step (percent): step `k` is scaled by `(1 + s)^k`.
    pub scale_drift_pct: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            rotation_deg: 0.5,
            translation_pct: 1.0,
            scale_drift_pct: 0.05,
        }
    }
}

/// `Δ_k = G_{k-1}⁻¹ · G_k` for world-from-camera poses.
pub fn relative_motions(gt: &Trajectory) -> Vec<SE3> {
    gt.entries()
        .windows(2)
        .map(|w| w[0].1.inverse().compose(&w[1].1))
        .collect()
}

/// Perturbs each ground-truth step: rotation by a random small rotation,
/// translation by Gaussian noise proportional to its length, then the
/// translation scaled by the cumulative drift `(1 + s)^k`.
pub fn corrupt_odometry(gt: &Trajectory, noise: &NoiseConfig, seed: u64) -> Vec<SE3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = Normal::new(0.0, noise.rotation_deg.to_radians()).expect("finite sigma");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let growth = 1.0 + noise.scale_drift_pct / 100.0;
    relative_motions(gt)
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let w = Vector3::from_fn(|_, _| rot.sample(&mut rng));
            let sigma_t = noise.translation_pct / 100.0 * d.translation().norm();
            let n = Vector3::from_fn(|_, _| unit.sample(&mut rng)) * sigma_t;
            let c = growth.powi(i as i32 + 1);
            SE3::new(UnitQuaternion::from_scaled_axis(w) * d.rotation(), (d.translation() + n) * c)
        })
        .collect()
}

/// Composes relative motions from a start pose.
pub fn chain(start: &SE3, motions: &[SE3]) -> Vec<SE3> {
    let mut out = Vec::with_capacity(motions.len() + 1);
    out.push(*start);
    for m in motions {
        let next = out.last().expect("non-empty").compose(m);
        out.push(next);
    }
    out
}
