//! Essential-matrix verification of bearing correspondences.

use nalgebra::{DMatrix, Matrix3, Vector3, SVD};
use serde::{Deserialize, Serialize};

use super::LoopRejection;
use crate::geom::{ransac, Estimator, RansacError, RansacParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpipolarParams {
    /// Inlier bound on `|b_rᵀ E b_c|` for unit bearings and unit-norm `E`.
    pub epsilon: f64,
    pub min_inliers: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for EpipolarParams {
    fn default() -> Self {
        EpipolarParams {
            epsilon: 0.01,
            min_inliers: 25,
            iterations: 200,
            seed: 0,
        }
    }
}

/// Bearing pair: reference (candidate) view first, current view second.
pub type BearingPair = (Vector3<f64>, Vector3<f64>);

#[derive(Debug, Clone)]
pub struct EpipolarResult {
    pub essential: Matrix3<f64>,
    pub inlier_mask: Vec<bool>,
    pub inliers: usize,
}

/// `E = [t]× R` for the motion `x_r = R·x_c + t`, so that `b_rᵀ E b_c = 0`.
pub fn essential_from_motion(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix3<f64> {
    crate::geom::hat(t) * r
}

pub fn epipolar_residual(e: &Matrix3<f64>, pair: &BearingPair) -> f64 {
    (pair.0.transpose() * e * pair.1)[(0, 0)].abs()
}

/// Below this ratio of the two smallest singular values of the design matrix
/// the null space is more than one-dimensional.
const DEGENERATE_RATIO: f64 = 1e-10;

/// Linear 8-point estimate projected onto the essential manifold
/// (singular values 1, 1, 0). Needs at least 8 pairs.
pub fn eight_point(pairs: &[&BearingPair]) -> Option<Matrix3<f64>> {
    let n = pairs.len();
    if n < 8 {
        return None;
    }
    // Pad to at least 9 rows so the thin SVD exposes the full right basis.
    let rows = n.max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (br, bc)) in pairs.iter().map(|p| (&p.0, &p.1)).enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                a[(k, 3 * i + j)] = br[i] * bc[j];
            }
        }
    }
    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if !(largest > 0.0) || second < DEGENERATE_RATIO * largest {
        return None;
    }
    let e_vec = v_t.row(smallest);
    let e = Matrix3::from_row_slice(e_vec.transpose().as_slice());
    let svd_e = e.svd(true, true);
    let (u, vt) = (svd_e.u?, svd_e.v_t?);
    let mut s = svd_e.singular_values;
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    for (rank, &i) in idx.iter().enumerate() {
        s[i] = if rank < 2 { 1.0 } else { 0.0 };
    }
    let projected = u * Matrix3::from_diagonal(&s) * vt;
    Some(projected / projected.norm())
}

struct EssentialEstimator;

impl Estimator for EssentialEstimator {
    type Datum = BearingPair;
    type Model = Matrix3<f64>;

    fn min_samples(&self) -> usize {
        8
    }

    fn fit(&self, sample: &[&BearingPair]) -> Option<Matrix3<f64>> {
        eight_point(sample)
    }

    fn residual(&self, e: &Matrix3<f64>, d: &BearingPair) -> f64 {
        epipolar_residual(e, d)
    }

    fn refit(&self, inliers: &[&BearingPair]) -> Option<Matrix3<f64>> {
        eight_point(inliers)
    }
}

/// 8-point RANSAC on unit bearing pairs. Accepts when at least
/// `params.min_inliers` pairs satisfy `|b_rᵀ E b_c| < ε`.
pub fn geometric_check(pairs: &[BearingPair], params: &EpipolarParams) -> Result<EpipolarResult, LoopRejection> {
    if pairs.len() < 8 {
        return Err(LoopRejection::InsufficientMatches(pairs.len()));
    }
    let rp = RansacParams {
        iterations: params.iterations,
        threshold: params.epsilon,
        min_inliers: params.min_inliers,
        seed: params.seed,
    };
    match ransac(&EssentialEstimator, pairs, &rp) {
        Ok(r) => Ok(EpipolarResult {
            essential: r.model,
            inlier_mask: r.inlier_mask,
            inliers: r.inlier_count,
        }),
        Err(RansacError::VerificationFailed { best: 0, .. }) => Err(LoopRejection::Degenerate),
        Err(RansacError::VerificationFailed { best, .. }) => Err(LoopRejection::TooFewInliers(best)),
        Err(RansacError::InsufficientData { got, .. }) => Err(LoopRejection::InsufficientMatches(got)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::SE3;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two views of random points; returns pairs and the motion current → reference.
    fn two_views(n: usize, seed: u64) -> (Vec<BearingPair>, SE3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let motion = SE3::exp(&Vector3::new(0.05, -0.1, 0.3), &Vector3::new(1.0, 0.4, -0.2));
        let pairs = (0..n)
            .map(|_| {
                let xc = Vector3::new(
                    rng.random_range(-6.0..6.0),
                    rng.random_range(-6.0..6.0),
                    rng.random_range(-2.0..4.0),
                );
                let xr = motion.transform_point(&xc);
                (xr.normalize(), xc.normalize())
            })
            .collect();
        (pairs, motion)
    }

    #[test]
    fn exact_views_are_all_inliers() {
        let (pairs, motion) = two_views(60, 1);
        let e_true = essential_from_motion(&motion.rotation_matrix(), motion.translation());
        assert!(pairs.iter().all(|p| epipolar_residual(&e_true, p) < 1e-10));
        let r = geometric_check(&pairs, &EpipolarParams::default()).unwrap();
        assert_eq!(r.inliers, 60);
    }

    #[test]
    fn scrambled_matches_are_rejected() {
        let (mut pairs, _) = two_views(80, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut cur: Vec<Vector3<f64>> = pairs[60..].iter().map(|p| p.1).collect();
        cur.shuffle(&mut rng);
        cur.rotate_left(1);
        for (p, c) in pairs[60..].iter_mut().zip(cur) {
            p.1 = c;
        }
        let r = geometric_check(&pairs, &EpipolarParams::default()).unwrap();
        let true_in = r.inlier_mask[..60].iter().filter(|&&m| m).count();
        let false_in = r.inlier_mask[60..].iter().filter(|&&m| m).count();
        assert!(true_in >= 57 && false_in <= 2, "{true_in} true, {false_in} false");
    }

    #[test]
    fn too_few_matches() {
        let (pairs, _) = two_views(7, 4);
        assert_eq!(
            geometric_check(&pairs, &EpipolarParams::default()).unwrap_err(),
            LoopRejection::InsufficientMatches(7)
        );
    }

    #[test]
    fn identical_bearings_are_degenerate() {
        let b = Vector3::new(0.3, 0.4, 0.5).normalize();
        let pairs = vec![(b, b); 20];
        assert_eq!(
            geometric_check(&pairs, &EpipolarParams::default()).unwrap_err(),
            LoopRejection::Degenerate
        );
    }
}
