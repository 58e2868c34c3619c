//! Global bundle adjustment over promoted keyframes and their points.
//!
//! Levenberg–Marquardt on reprojection error with a Huber kernel. Points are
//! eliminated with the Schur complement and the reduced camera system is
//! solved with a sparse Cholesky factorization.

use nalgebra::{DVector, Matrix2x3, Matrix2x6, Matrix3, Matrix6, Matrix6x3, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::linear::SparseBuilder;
use super::pose_graph::huber;
use super::SlamMap;
use crate::camera::{Camera, CameraModel};
use crate::geom::{hat, SE3};
use crate::ids::{KeyframeId, MapPointId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaParams {
    pub max_iterations: usize,
    /// Huber threshold in pixels.
    pub huber_px: f64,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub relative_decrease: f64,
    pub initial_lambda: f64,
    /// Points with fewer observations stay fixed.
    pub min_observations: usize,
}

impl Default for BaParams {
    fn default() -> Self {
        BaParams {
            max_iterations: 20,
            huber_px: 2.0,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            relative_decrease: 1e-6,
            initial_lambda: 1e-4,
            min_observations: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaStats {
    pub iterations: usize,
    pub initial_chi2: f64,
    pub final_chi2: f64,
    pub chi2_history: Vec<f64>,
    /// Per-coordinate RMS, `sqrt(Σ|r|² / 2n)`, in pixels.
    pub initial_rms_px: f64,
    pub final_rms_px: f64,
    pub initial_mean_px: f64,
    pub final_mean_px: f64,
    pub observations: usize,
    pub optimized_poses: usize,
    pub optimized_points: usize,
    pub termination: String,
}

/// Residual `u − π(T·P)` and its Jacobians with respect to a left
/// perturbation `exp(ξ)·T`, `ξ = (ω, ν)`, and to the point `P`.
pub fn reprojection_jacobians(
    camera: &Camera,
    pose: &SE3,
    point: &Vector3<f64>,
    measured: &Vector2<f64>,
) -> Option<(Vector2<f64>, Matrix2x6<f64>, Matrix2x3<f64>)> {
    let p = pose.transform_point(point);
    let proj = camera.project(&p).ok()?;
    let jp = camera.project_jacobian(&p).ok()?;
    let r = measured - proj.pixel;
    let mut dp = nalgebra::Matrix3x6::zeros();
    dp.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-hat(&p)));
    dp.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    Some((r, -jp * dp, -jp * pose.rotation_matrix()))
}

fn residual(camera: &Camera, pose: &SE3, point: &Vector3<f64>, measured: &Vector2<f64>) -> Option<Vector2<f64>> {
    let p = pose.transform_point(point);
    if !p.iter().all(|v| v.is_finite()) {
        return None;
    }
    camera.project(&p).ok().map(|proj| measured - proj.pixel)
}

struct Problem {
    /// Optimized keyframes and their column index.
    poses: BTreeMap<KeyframeId, usize>,
    points: BTreeMap<MapPointId, usize>,
    /// (keyframe, point, measurement)
    obs: Vec<(KeyframeId, MapPointId, Vector2<f64>)>,
}

struct Summary {
    chi2: f64,
    sq: f64,
    abs: f64,
    n: usize,
}

fn evaluate(
    camera: &Camera,
    problem: &Problem,
    poses: &BTreeMap<KeyframeId, SE3>,
    points: &BTreeMap<MapPointId, Vector3<f64>>,
    delta: f64,
) -> Summary {
    let mut s = Summary { chi2: 0.0, sq: 0.0, abs: 0.0, n: 0 };
    for (k, m, u) in &problem.obs {
        if let Some(r) = residual(camera, &poses[k], &points[m], u) {
            let e = r.norm_squared();
            s.chi2 += huber(e, Some(delta)).0;
            s.sq += e;
            s.abs += e.sqrt();
            s.n += 1;
        }
    }
    s
}

/// Jointly refines the poses of promoted keyframes and the points they
/// observe. Active keyframes are held fixed, as are points with fewer than
/// `min_observations` measurements.
pub fn global_ba(map: &mut SlamMap, camera: &Camera, params: &BaParams) -> BaStats {
    let fixed: BTreeSet<KeyframeId> = map.local_set();
    let poses_idx: BTreeMap<KeyframeId, usize> = map
        .keyframes
        .keys()
        .filter(|k| !fixed.contains(k))
        .enumerate()
        .map(|(i, k)| (*k, i))
        .collect();
    let mut points_idx = BTreeMap::new();
    let mut obs = Vec::new();
    for (id, p) in &map.points {
        let mut n = 0;
        for (k, u) in &p.observations {
            if map.keyframes.contains_key(k) {
                obs.push((*k, *id, *u));
                n += 1;
            }
        }
        if n >= params.min_observations.max(1) {
            let i = points_idx.len();
            points_idx.insert(*id, i);
        }
    }
    let problem = Problem { poses: poses_idx, points: points_idx, obs };

    let mut poses: BTreeMap<KeyframeId, SE3> = map.keyframes.iter().map(|(k, kf)| (*k, kf.pose)).collect();
    let mut points: BTreeMap<MapPointId, Vector3<f64>> = map.points.iter().map(|(k, p)| (*k, p.position)).collect();

    let delta = params.huber_px;
    let start = evaluate(camera, &problem, &poses, &points, delta);
    let mut stats = BaStats {
        iterations: 0,
        initial_chi2: start.chi2,
        final_chi2: start.chi2,
        chi2_history: vec![start.chi2],
        initial_rms_px: rms(&start),
        final_rms_px: rms(&start),
        initial_mean_px: mean(&start),
        final_mean_px: mean(&start),
        observations: start.n,
        optimized_poses: problem.poses.len(),
        optimized_points: problem.points.len(),
        termination: "max iterations".into(),
    };
    if problem.poses.is_empty() && problem.points.is_empty() {
        stats.termination = "nothing to optimize".into();
        return stats;
    }

    let mut chi2 = start.chi2;
    let mut lambda = params.initial_lambda;
    'outer: for _ in 0..params.max_iterations {
        let lin = linearize(camera, &problem, &poses, &points, delta);
        if lin.gradient_max() < params.gradient_tolerance {
            stats.termination = "gradient".into();
            break;
        }
        stats.iterations += 1;
        loop {
            let step = lin.solve(lambda);
            let Some((dpose, dpoint)) = step else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    stats.termination = "linear solve failed".into();
                    break 'outer;
                }
                continue;
            };
            let norm = (dpose.norm_squared() + dpoint.norm_squared()).sqrt();
            if norm < params.step_tolerance {
                stats.termination = "step".into();
                break 'outer;
            }
            let mut tp = poses.clone();
            for (k, i) in &problem.poses {
                let d = dpose.fixed_rows::<6>(6 * i);
                let inc = SE3::exp(&Vector3::new(d[0], d[1], d[2]), &Vector3::new(d[3], d[4], d[5]));
                tp.insert(*k, inc.compose(&poses[k]));
            }
            let mut tq = points.clone();
            for (m, i) in &problem.points {
                let d = dpoint.fixed_rows::<3>(3 * i);
                *tq.get_mut(m).expect("point") += d;
            }
            let trial = evaluate(camera, &problem, &tp, &tq, delta);
            if trial.chi2 < chi2 && trial.n == start.n {
                let decrease = (chi2 - trial.chi2) / chi2.max(f64::MIN_POSITIVE);
                poses = tp;
                points = tq;
                chi2 = trial.chi2;
                stats.chi2_history.push(chi2);
                lambda = (lambda / 3.0).max(1e-12);
                if decrease < params.relative_decrease {
                    stats.termination = "converged".into();
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                stats.termination = "no decrease".into();
                break 'outer;
            }
        }
    }

    for k in problem.poses.keys() {
        map.keyframes.get_mut(k).expect("keyframe").pose = poses[k];
    }
    for m in problem.points.keys() {
        map.points.get_mut(m).expect("point").position = points[m];
    }
    let end = evaluate(camera, &problem, &poses, &points, delta);
    stats.final_chi2 = end.chi2;
    stats.final_rms_px = rms(&end);
    stats.final_mean_px = mean(&end);
    stats
}

fn rms(s: &Summary) -> f64 {
    if s.n == 0 {
        0.0
    } else {
        (s.sq / (2.0 * s.n as f64)).sqrt()
    }
}

fn mean(s: &Summary) -> f64 {
    if s.n == 0 {
        0.0
    } else {
        s.abs / s.n as f64
    }
}

/// Normal equations split into pose (A), point (C) and coupling (B) blocks.
struct Linearization {
    a: BTreeMap<(usize, usize), Matrix6<f64>>,
    g_pose: DVector<f64>,
    c: Vec<Matrix3<f64>>,
    g_point: DVector<f64>,
    /// Per point: (pose column, B block).
    b: Vec<Vec<(usize, Matrix6x3<f64>)>>,
}

fn linearize(
    camera: &Camera,
    problem: &Problem,
    poses: &BTreeMap<KeyframeId, SE3>,
    points: &BTreeMap<MapPointId, Vector3<f64>>,
    delta: f64,
) -> Linearization {
    let np = problem.poses.len();
    let nm = problem.points.len();
    let mut lin = Linearization {
        a: BTreeMap::new(),
        g_pose: DVector::zeros(6 * np),
        c: vec![Matrix3::zeros(); nm],
        g_point: DVector::zeros(3 * nm),
        b: vec![Vec::new(); nm],
    };
    // Pose blocks touched by each point, so A gets the Schur fill pattern.
    for (k, m, u) in &problem.obs {
        let Some((r, jt, jp)) = reprojection_jacobians(camera, &poses[k], &points[m], u) else {
            continue;
        };
        let w = huber(r.norm_squared(), Some(delta)).1;
        let ki = problem.poses.get(k).copied();
        let mi = problem.points.get(m).copied();
        if let Some(ki) = ki {
            *lin.a.entry((ki, ki)).or_insert_with(Matrix6::zeros) += jt.transpose() * jt * w;
            let mut g = lin.g_pose.fixed_rows_mut::<6>(6 * ki);
            g += jt.transpose() * r * w;
        }
        if let Some(mi) = mi {
            lin.c[mi] += jp.transpose() * jp * w;
            let mut g = lin.g_point.fixed_rows_mut::<3>(3 * mi);
            g += jp.transpose() * r * w;
            if let Some(ki) = ki {
                let blk = jt.transpose() * jp * w;
                match lin.b[mi].iter_mut().find(|(c, _)| *c == ki) {
                    Some((_, b)) => *b += blk,
                    None => lin.b[mi].push((ki, blk)),
                }
            }
        }
    }
    lin
}

impl Linearization {
    fn gradient_max(&self) -> f64 {
        self.g_pose.amax().max(self.g_point.amax())
    }

    /// Solves the damped system; returns (pose step, point step).
    fn solve(&self, lambda: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        let np = self.g_pose.len() / 6;
        let damp3 = |m: &Matrix3<f64>| {
            let mut d = *m;
            for i in 0..3 {
                d[(i, i)] += lambda * m[(i, i)].max(1e-9);
            }
            d
        };
        let c_inv: Vec<Matrix3<f64>> = self
            .c
            .iter()
            .map(|c| damp3(c).try_inverse())
            .collect::<Option<_>>()?;

        let mut pose_step = DVector::zeros(6 * np);
        if np > 0 {
            let mut s: BTreeMap<(usize, usize), Matrix6<f64>> = self.a.clone();
            for i in 0..np {
                let d = s.entry((i, i)).or_insert_with(Matrix6::zeros);
                for r in 0..6 {
                    d[(r, r)] += lambda * d[(r, r)].max(1e-9);
                }
            }
            // rhs = -g_p + Σ B C⁻¹ g_m
            let mut rhs = -&self.g_pose;
            for (m, blocks) in self.b.iter().enumerate() {
                let gm = self.g_point.fixed_rows::<3>(3 * m).into_owned();
                let cg = c_inv[m] * gm;
                for (k, bk) in blocks {
                    let bc = bk * c_inv[m];
                    let mut r = rhs.fixed_rows_mut::<6>(6 * k);
                    r += bk * cg;
                    for (l, bl) in blocks {
                        *s.entry((*k, *l)).or_insert_with(Matrix6::zeros) -= bc * bl.transpose();
                    }
                }
            }
            let mut h = SparseBuilder::new(6 * np);
            for ((k, l), blk) in &s {
                h.push_block(6 * k, 6 * l, blk);
            }
            pose_step = h.solve(&DVector::zeros(6 * np), &rhs)?;
        }
        // δl = C⁻¹(−g_l − Bᵀ δp)
        let mut point_step = DVector::zeros(self.g_point.len());
        for (m, blocks) in self.b.iter().enumerate() {
            let mut r: Vector3<f64> = -self.g_point.fixed_rows::<3>(3 * m).into_owned();
            for (k, bk) in blocks {
                let dp: Vector6<f64> = pose_step.fixed_rows::<6>(6 * k).into_owned();
                r -= bk.transpose() * dp;
            }
            point_step.fixed_rows_mut::<3>(3 * m).copy_from(&(c_inv[m] * r));
        }
        Some((pose_step, point_step))
    }
}
