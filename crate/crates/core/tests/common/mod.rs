//! Synthetic graphs and maps shared by the backend and acceptance tests.
#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use palloop::backend::{Keyframe, MapPoint, Observation, PoseGraph, PoseGraphEdge, SlamMap};
use palloop::camera::{Camera, CameraModel, PalCamera};
use palloop::geom::{Sim3, SE3};
use palloop::ids::{KeyframeId, MapPointId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;

pub fn kf(i: u32) -> KeyframeId {
    KeyframeId(i)
}

pub fn sim(axis: Vector3<f64>, angle: f64, t: Vector3<f64>, s: f64) -> Sim3 {
    Sim3::new(UnitQuaternion::from_scaled_axis(axis.normalize() * angle), t, s).unwrap()
}

pub fn odometry_edge(from: u32, to: u32, m: Sim3) -> PoseGraphEdge {
    PoseGraphEdge { from: kf(from), to: kf(to), measurement: m, fixed_scale: true, robust: false }
}

/// World-from-camera pose `i` of `n` on a circle of unit steps, facing along
/// the tangent.
pub fn circle_pose(i: usize, n: usize) -> Sim3 {
    let radius = 1.0 / (2.0 * (std::f64::consts::PI / n as f64).sin());
    let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
    Sim3::new(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), a + std::f64::consts::FRAC_PI_2),
        Vector3::new(radius * a.cos(), radius * a.sin(), 0.0),
        1.0,
    )
    .unwrap()
}

pub fn drifting_loop(n: usize, drift: f64, seed: u64) -> (PoseGraph, Vec<Sim3>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot_noise = Normal::new(0.0, 0.5f64.to_radians()).unwrap();
    let truth: Vec<Sim3> = (0..n).map(|i| circle_pose(i, n)).collect();
    let mut g = PoseGraph::default();
    let mut est = truth[0];
    g.vertices.insert(kf(0), est);
    for i in 1..n {
        let rel = truth[i - 1].inverse().compose(&truth[i]);
        let c = drift.powf(i as f64 / (n - 1) as f64);
        let t = rel.translation();
        let t_noise = Normal::new(0.0, 0.01 * t.norm()).unwrap();
        let t_hat = c * (t + Vector3::from_fn(|_, _| t_noise.sample(&mut rng)));
        let r_hat = UnitQuaternion::from_scaled_axis(Vector3::from_fn(|_, _| rot_noise.sample(&mut rng))) * rel.rotation();
        let m = Sim3::new(r_hat, t_hat, 1.0).unwrap();
        est = est.compose(&m);
        g.vertices.insert(kf(i as u32), est);
        g.edges.push(odometry_edge(i as u32 - 1, i as u32, m));
    }
    // True vertex i maps camera coordinates measured at local scale c_i.
    let truth_scaled = truth
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let c = drift.powf(i as f64 / (n - 1) as f64);
            Sim3::new(*s.rotation(), *s.translation(), 1.0 / c).unwrap()
        })
        .collect();
    (g, truth_scaled)
}

/// Keyframes along a gentle curve with points on surrounding walls, all
/// observed by a panoramic camera. `noise_px` perturbs the measurements.
pub fn synthetic_map(noise_px: f64, seed: u64) -> (SlamMap, Camera) {
    let camera = Camera::Panoramic(PalCamera::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_px.max(1e-300)).unwrap();
    let mut map = SlamMap::new(3);
    let n_kf = 12;
    let poses: Vec<SE3> = (0..n_kf)
        .map(|i| {
            let x = i as f64 * 0.8;
            let yaw = 0.05 * i as f64;
            SE3::new(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw), Vector3::new(x, 0.1 * (x * 0.5).sin(), 0.0))
                .inverse()
        })
        .collect();
    let points: Vec<Vector3<f64>> = (0..300)
        .map(|_| {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Vector3::new(rng.random_range(-2.0..12.0), side * rng.random_range(2.0..4.0), rng.random_range(0.2..2.5))
        })
        .collect();
    let mut obs: Vec<Vec<Observation>> = vec![Vec::new(); n_kf];
    let mut mps = Vec::new();
    for (m, p) in points.iter().enumerate() {
        let id = MapPointId(m as u32);
        let mut mp = MapPoint { id, position: *p, reference: kf(0), observations: Vec::new(), landmark: None };
        for (k, pose) in poses.iter().enumerate() {
            let pc = pose.transform_point(p);
            let Ok(proj) = camera.project(&pc) else { continue };
            if !proj.valid || pc.norm() > 8.0 {
                continue;
            }
            let u = proj.pixel + if noise_px > 0.0 {
                Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                Vector2::zeros()
            };
            if mp.observations.is_empty() {
                mp.reference = kf(k as u32);
            }
            mp.observations.push((kf(k as u32), u));
            obs[k].push(Observation { point: id, pixel: u });
        }
        if !mp.observations.is_empty() {
            mps.push(mp);
        }
    }
    for mp in mps {
        map.add_point(mp);
    }
    for (k, pose) in poses.iter().enumerate() {
        let mut f = Keyframe::new(kf(k as u32), k as f64, *pose);
        f.observations = std::mem::take(&mut obs[k]);
        map.insert_keyframe(f);
    }
    (map, camera)
}

pub fn reprojection_residuals(map: &SlamMap, camera: &Camera) -> Vec<Vector2<f64>> {
    let mut out = Vec::new();
    for p in map.points.values() {
        for (k, u) in &p.observations {
            let pc = map.keyframes[k].pose.transform_point(&p.position);
            out.push(u - camera.project(&pc).unwrap().pixel);
        }
    }
    out
}

pub fn vertices(map: &SlamMap) -> BTreeMap<KeyframeId, Sim3> {
    map.keyframes.iter().map(|(k, f)| (*k, Sim3::from_se3(&f.pose.inverse()))).collect()
}

