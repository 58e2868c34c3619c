//! Similarity between two keyframes' local maps from matched features.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{approximate_depth, LoopRejection};
use crate::backend::{DepthGrid, Keyframe};
use crate::geom::{horn_align, ransac, Estimator, RansacError, RansacParams, Sim3};
use crate::ids::KeyframeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sim3Params {
    /// Inlier bound on the symmetric relative 3D error.
    pub threshold: f64,
    pub min_inliers: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for Sim3Params {
    fn default() -> Self {
        Sim3Params {
            threshold: 0.05,
            min_inliers: 12,
            iterations: 200,
            seed: 0,
        }
    }
}

/// Relative similarity between a loop candidate and the current keyframe:
/// `relative` maps points from the candidate camera frame into the current
/// camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sim3Constraint {
    pub from: KeyframeId,
    pub to: KeyframeId,
    pub relative: Sim3,
    pub inliers: usize,
    /// Mean `‖S·a − b‖` over inliers, in current-frame units.
    pub mean_residual: f64,
}

/// 3D point pair: candidate frame first, current frame second.
pub type PointPair = (Vector3<f64>, Vector3<f64>);

#[derive(Debug, Clone)]
pub struct Sim3Estimate {
    pub transform: Sim3,
    pub inlier_mask: Vec<bool>,
    pub inliers: usize,
    pub mean_residual: f64,
}

/// Larger of the forward and backward point errors, each relative to the
/// range of the point it is compared against.
fn symmetric_relative_error(s: &Sim3, inv: &Sim3, p: &PointPair) -> f64 {
    let fwd = (s.transform_point(&p.0) - p.1).norm() / p.1.norm().max(1e-12);
    let bwd = (inv.transform_point(&p.1) - p.0).norm() / p.0.norm().max(1e-12);
    fwd.max(bwd)
}

struct HornEstimator;

impl Estimator for HornEstimator {
    type Datum = PointPair;
    type Model = (Sim3, Sim3);

    fn min_samples(&self) -> usize {
        3
    }

    fn fit(&self, sample: &[&PointPair]) -> Option<(Sim3, Sim3)> {
        let src: Vec<_> = sample.iter().map(|p| p.0).collect();
        let dst: Vec<_> = sample.iter().map(|p| p.1).collect();
        let s = horn_align(&src, &dst).ok()?.transform;
        Some((s, s.inverse()))
    }

    fn residual(&self, m: &(Sim3, Sim3), d: &PointPair) -> f64 {
        symmetric_relative_error(&m.0, &m.1, d)
    }

    fn refit(&self, inliers: &[&PointPair]) -> Option<(Sim3, Sim3)> {
        self.fit(inliers)
    }
}

/// Horn alignment inside RANSAC (3-point samples), refit on the inliers.
pub fn estimate_sim3(pairs: &[PointPair], params: &Sim3Params) -> Result<Sim3Estimate, LoopRejection> {
    if pairs.len() < 3 {
        return Err(LoopRejection::InsufficientDepth(pairs.len()));
    }
    let rp = RansacParams {
        iterations: params.iterations,
        threshold: params.threshold,
        min_inliers: params.min_inliers.max(3),
        seed: params.seed,
    };
    let r = ransac(&HornEstimator, pairs, &rp).map_err(|e| match e {
        RansacError::VerificationFailed { best, .. } => LoopRejection::TooFewSim3Inliers(best),
        RansacError::InsufficientData { got, .. } => LoopRejection::InsufficientDepth(got),
    })?;
    let s = r.model.0;
    let (sum, n) = pairs
        .iter()
        .zip(&r.inlier_mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(acc, n), (p, _)| (acc + (s.transform_point(&p.0) - p.1).norm(), n + 1));
    Ok(Sim3Estimate {
        transform: s,
        inlier_mask: r.inlier_mask,
        inliers: r.inlier_count,
        mean_residual: sum / n.max(1) as f64,
    })
}

/// Lifts matched corners `(candidate index, current index)` to 3D with
/// [`approximate_depth`] in each keyframe, then estimates the similarity.
/// Matches without a depth on either side are skipped. Also returns the
/// matches that ended up as inliers.
pub fn compute_sim3(
    candidate: &Keyframe,
    current: &Keyframe,
    matches: &[(usize, usize)],
    candidate_depths: &DepthGrid,
    current_depths: &DepthGrid,
    params: &Sim3Params,
) -> Result<(Sim3Constraint, Vec<(usize, usize)>), LoopRejection> {
    let (used, pairs): (Vec<(usize, usize)>, Vec<PointPair>) = matches
        .iter()
        .filter_map(|&(a, b)| {
            let da = approximate_depth(candidate_depths, &candidate.corners[a].position)?;
            let db = approximate_depth(current_depths, &current.corners[b].position)?;
            Some(((a, b), (candidate.bearings[a] * da, current.bearings[b] * db)))
        })
        .unzip();
    let est = estimate_sim3(&pairs, params)?;
    let inlier_matches = used
        .into_iter()
        .zip(&est.inlier_mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| x)
        .collect();
    let constraint = Sim3Constraint {
        from: candidate.id,
        to: current.id,
        relative: est.transform,
        inliers: est.inliers,
        mean_residual: est.mean_residual,
    };
    Ok((constraint, inlier_matches))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-1.0..4.0),
                )
            })
            .collect()
    }

    fn truth(scale: f64) -> Sim3 {
        Sim3::new(
            UnitQuaternion::from_euler_angles(0.02, -0.03, 0.4),
            Vector3::new(0.5, -1.0, 0.1),
            scale,
        )
        .unwrap()
    }

    #[test]
    fn exact_scaled_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = truth(1.7);
        let pairs: Vec<PointPair> = cloud(40, &mut rng).into_iter().map(|p| (p, s.transform_point(&p))).collect();
        let est = estimate_sim3(&pairs, &Sim3Params::default()).unwrap();
        assert!((est.transform.scale() - 1.7).abs() < 1e-6);
        assert_eq!(est.inliers, 40);
    }

    #[test]
    fn identical_maps_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs: Vec<PointPair> = cloud(30, &mut rng).into_iter().map(|p| (p, p)).collect();
        let est = estimate_sim3(&pairs, &Sim3Params::default()).unwrap();
        assert!(est.transform.approx_eq(&Sim3::identity(), 1e-9));
    }

    #[test]
    fn tolerates_wrong_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = truth(1.2);
        let pts = cloud(100, &mut rng);
        let mut dst: Vec<_> = pts
            .iter()
            .map(|p| {
                let q = s.transform_point(p);
                q * (1.0 + rng.random_range(-0.01..0.01))
            })
            .collect();
        let mut wrong: Vec<_> = dst[..30].to_vec();
        wrong.shuffle(&mut rng);
        wrong.rotate_left(1);
        dst[..30].copy_from_slice(&wrong);
        let pairs: Vec<PointPair> = pts.into_iter().zip(dst).collect();
        let est = estimate_sim3(&pairs, &Sim3Params::default()).unwrap();
        assert!((est.transform.scale() / 1.2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn too_few_points() {
        let pairs = vec![(Vector3::x(), Vector3::x()); 2];
        assert_eq!(
            estimate_sim3(&pairs, &Sim3Params::default()).unwrap_err(),
            LoopRejection::InsufficientDepth(2)
        );
    }
}
