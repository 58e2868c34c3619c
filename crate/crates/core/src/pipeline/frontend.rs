//! Simulated front-end: turns simulator observations and drifting odometry
//! into keyframes with features, BoW vectors and tracked map points.

use image::GrayImage;
use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;

use crate::backend::{Keyframe, MapPoint, Observation, SlamMap};
use crate::bow::Vocabulary;
use crate::camera::{Camera, CameraModel};
use crate::features::{detect_corners_with, hybrid_select, Descriptor, DetectorParams, Grid, Keypoint};
use crate::geom::SE3;
use crate::ids::{KeyframeId, LandmarkId, MapPointId};
use crate::sim::{mix_seed, render_frame, ObservationMode, Scenario};

/// Largest pixel distance for attributing a detected corner to a landmark.
const ASSOCIATION_PX: f64 = 2.0;

/// Corners of one frame with their simulator provenance.
#[derive(Debug, Clone, Default)]
pub struct FrameFeatures {
    pub corners: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    pub bearings: Vec<Vector3<f64>>,
    pub landmarks: Vec<Option<LandmarkId>>,
    /// True camera-frame range of each corner's landmark.
    pub ranges: Vec<Option<f64>>,
    pub image: Option<GrayImage>,
}

/// Extracts the strongest `budget` corners of keyframe `k`.
pub fn extract(scenario: &Scenario, k: usize, budget: usize) -> FrameFeatures {
    let obs = scenario.observe(k);
    let camera = &scenario.config.camera;
    match scenario.config.mode {
        ObservationMode::Abstract => {
            let mut f = FrameFeatures::default();
            for o in obs.into_iter().take(budget) {
                f.corners.push(Keypoint::corner(o.pixel, o.response, 0.0));
                f.descriptors.push(o.descriptor);
                f.bearings.push(o.bearing);
                f.landmarks.push(Some(o.landmark));
                f.ranges.push(Some(o.range));
            }
            f
        }
        ObservationMode::Rendered => {
            let pose = scenario.ground_truth.entries()[k].1;
            let img = render_frame(
                &scenario.world,
                &pose,
                camera,
                &scenario.config.observe,
                scenario.frame_seed(k),
            );
            let in_view = |p: &Vector2<f64>| camera.pixel_in_view(p);
            let detected = detect_corners_with(&img, budget, &DetectorParams::default(), &in_view);
            let mut f = FrameFeatures::default();
            for d in detected {
                let Ok(b) = camera.back_project(&d.keypoint.position) else { continue };
                let near = obs
                    .iter()
                    .map(|o| ((o.pixel - d.keypoint.position).norm(), o))
                    .filter(|(dist, _)| *dist <= ASSOCIATION_PX)
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                f.corners.push(d.keypoint);
                f.descriptors.push(d.descriptor);
                f.bearings.push(b.normalize());
                f.landmarks.push(near.map(|(_, o)| o.landmark));
                f.ranges.push(near.map(|(_, o)| o.range));
            }
            f.image = Some(img);
            f
        }
    }
}

/// Builds keyframes on top of a drifting odometry chain.
pub struct Frontend<'a> {
    scenario: &'a Scenario,
    vocabulary: &'a Vocabulary,
    grid: Grid,
    budget: usize,
    depth_noise: f64,
    /// Cumulative odometry scale at each keyframe.
    scales: Vec<f64>,
    /// Odometry motions (world-from-camera relative).
    motions: Vec<SE3>,
    /// Map point currently tracked for each landmark.
    tracks: HashMap<LandmarkId, MapPointId>,
    /// Corners kept by the hybrid selection / all corners, per keyframe.
    pub selection_ratios: Vec<f64>,
}

impl<'a> Frontend<'a> {
    pub fn new(
        scenario: &'a Scenario,
        vocabulary: &'a Vocabulary,
        motions: Vec<SE3>,
        budget: usize,
        grid_cell: u32,
        depth_noise: f64,
    ) -> Self {
        let cam = &scenario.config.camera;
        let growth = 1.0 + scenario.config.noise.scale_drift_pct / 100.0;
        let scales = (0..=motions.len()).map(|k| growth.powi(k as i32)).collect();
        Frontend {
            scenario,
            vocabulary,
            grid: Grid::new(cam.width(), cam.height(), grid_cell),
            budget,
            depth_noise,
            scales,
            motions,
            tracks: HashMap::new(),
            selection_ratios: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn camera(&self) -> &Camera {
        &self.scenario.config.camera
    }

    /// Creates keyframe `k` and inserts it into the map. Its pose chains
    /// the odometry onto the previous keyframe; selected corners extend
    /// tracks of landmarks still seen by the local map, or start new points.
    /// Returns the keyframes promoted to the global map.
    pub fn process(&mut self, map: &mut SlamMap, k: usize) -> Vec<KeyframeId> {
        let id = KeyframeId(k as u32);
        let (timestamp, gt) = self.scenario.ground_truth.entries()[k];
        // World-from-camera estimate.
        let est = match k {
            0 => gt,
            _ => {
                let prev = map.keyframes[&KeyframeId(k as u32 - 1)].pose.inverse();
                prev.compose(&self.motions[k - 1])
            }
        };
        let f = extract(self.scenario, k, self.budget);
        let camera = self.camera().clone();
        let in_view = |p: &Vector2<f64>| camera.pixel_in_view(p);
        let selection = hybrid_select(&f.corners, f.image.as_ref(), &self.grid, &in_view);
        self.selection_ratios
            .push(selection.corner_indices.len() as f64 / f.corners.len().max(1) as f64);

        let local = map.local_set();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.scenario.frame_seed(k), 0xde97));
        let depth = Normal::new(0.0, self.depth_noise.max(0.0)).expect("finite sigma");
        let mut corner_points = vec![None; f.corners.len()];
        let mut observations = Vec::new();
        for &i in &selection.corner_indices {
            let (Some(l), Some(range)) = (f.landmarks[i], f.ranges[i]) else { continue };
            let pixel = f.corners[i].position;
            let tracked = self.tracks.get(&l).copied().filter(|mp| {
                map.points
                    .get(mp)
                    .is_some_and(|p| p.observations.iter().any(|(kf, _)| local.contains(kf)))
            });
            let mp = match tracked {
                Some(mp) => {
                    map.points.get_mut(&mp).expect("tracked point").observations.push((id, pixel));
                    mp
                }
                None => {
                    let r = self.scales[k] * range * (1.0 + depth.sample(&mut rng));
                    let position = est.transform_point(&(f.bearings[i] * r));
                    let mp = map.allocate_point_id();
                    map.add_point(MapPoint {
                        id: mp,
                        position,
                        reference: id,
                        observations: vec![(id, pixel)],
                        landmark: Some(l),
                    });
                    self.tracks.insert(l, mp);
                    mp
                }
            };
            corner_points[i] = Some(mp);
            observations.push(Observation { point: mp, pixel });
        }

        let mut kf = Keyframe::new(id, timestamp, est.inverse());
        kf.bow = self.vocabulary.transform(&f.descriptors);
        kf.corners = f.corners;
        kf.descriptors = f.descriptors;
        kf.bearings = f.bearings;
        kf.corner_points = corner_points;
        kf.supplements = selection.supplements;
        kf.observations = observations;
        kf.corner_landmarks = f.landmarks;
        map.insert_keyframe(kf)
    }
}
