//! Keyframes, map points and the local/global map split.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::bow::{BowDatabase, BowVector};
use crate::features::{Descriptor, Grid, Keypoint};
use crate::geom::{Sim3, SE3};
use crate::ids::{KeyframeId, LandmarkId, MapPointId};

/// A pixel measurement of a map point in one keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub point: MapPointId,
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub id: KeyframeId,
    pub timestamp: f64,
    /// Camera-from-world.
    pub pose: SE3,
    /// All extracted corners; these feed the BoW vector and loop matching.
    pub corners: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    /// Unit bearings of `corners` in the camera frame.
    pub bearings: Vec<Vector3<f64>>,
    /// Map point tracked at each corner, if the corner was selected.
    pub corner_points: Vec<Option<MapPointId>>,
    /// Gradient supplements chosen by the hybrid selection.
    pub supplements: Vec<Keypoint>,
    pub bow: BowVector,
    /// Map points measured in this keyframe.
    pub observations: Vec<Observation>,
    pub active: bool,
    /// Simulator bookkeeping for scoring only: source landmark of each corner.
    /// Never read by the estimation pipeline.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corner_landmarks: Vec<Option<LandmarkId>>,
}

impl Keyframe {
    /// A keyframe with no features or observations yet.
    pub fn new(id: KeyframeId, timestamp: f64, pose: SE3) -> Self {
        Keyframe {
            id,
            timestamp,
            pose,
            corners: Vec::new(),
            descriptors: Vec::new(),
            bearings: Vec::new(),
            corner_points: Vec::new(),
            supplements: Vec::new(),
            bow: BowVector::default(),
            observations: Vec::new(),
            active: false,
            corner_landmarks: Vec::new(),
        }
    }

    /// World-from-camera position.
    pub fn center(&self) -> Vector3<f64> {
        self.pose.inverse().translation().to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub id: MapPointId,
    pub position: Vector3<f64>,
    /// Keyframe whose frame anchors the point when poses are corrected.
    pub reference: KeyframeId,
    pub observations: Vec<(KeyframeId, Vector2<f64>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark: Option<LandmarkId>,
}

/// Pose-graph edge: relative similarity `S_ij` between vertices `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: KeyframeId,
    pub to: KeyframeId,
    pub relative: Sim3,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Sequential,
    Loop,
}

/// Keyframes and map points, with a sliding local window of active
/// keyframes. Keyframes leaving the window join the global map and the BoW
/// database.
#[derive(Debug, Clone, Default)]
pub struct SlamMap {
    pub keyframes: BTreeMap<KeyframeId, Keyframe>,
    pub points: BTreeMap<MapPointId, MapPoint>,
    pub edges: Vec<GraphEdge>,
    pub database: BowDatabase,
    local: VecDeque<KeyframeId>,
    /// Sequential edges of active keyframes, measured at insertion.
    pending: BTreeMap<KeyframeId, GraphEdge>,
    window: usize,
    next_point: u32,
}

impl SlamMap {
    pub fn new(window: usize) -> Self {
        SlamMap {
            window: window.max(1),
            ..Default::default()
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn local_ids(&self) -> impl Iterator<Item = KeyframeId> + '_ {
        self.local.iter().copied()
    }

    pub fn local_set(&self) -> BTreeSet<KeyframeId> {
        self.local.iter().copied().collect()
    }

    /// Promoted keyframes, oldest first.
    pub fn global_ids(&self) -> impl Iterator<Item = KeyframeId> + '_ {
        self.keyframes.values().filter(|k| !k.active).map(|k| k.id)
    }

    pub fn allocate_point_id(&mut self) -> MapPointId {
        let id = MapPointId(self.next_point);
        self.next_point += 1;
        id
    }

    pub fn add_point(&mut self, p: MapPoint) {
        self.next_point = self.next_point.max(p.id.0 + 1);
        self.points.insert(p.id, p);
    }

    /// Sequential edges of keyframes still in the local window.
    pub fn pending_edges(&self) -> impl Iterator<Item = &GraphEdge> + '_ {
        self.pending.values()
    }

    /// Inserts a new active keyframe and promotes the oldest ones while the
    /// window is over capacity. Returns the promoted ids.
    ///
    /// The keyframe is linked to its predecessor with a scale-1 sequential
    /// edge `S_ij = T_i · T_j⁻¹` (`i` the predecessor), which equals
    /// `S_i⁻¹ · S_j` for world-from-camera vertices `S = T⁻¹`. The edge is
    /// measured now, so later corrections of either pose don't leak into it.
    pub fn insert_keyframe(&mut self, mut kf: Keyframe) -> Vec<KeyframeId> {
        kf.active = true;
        if let Some((pid, prev)) = self.keyframes.range(..kf.id).next_back() {
            let rel = prev.pose.compose(&kf.pose.inverse());
            self.pending.insert(
                kf.id,
                GraphEdge {
                    from: *pid,
                    to: kf.id,
                    relative: Sim3::from_se3(&rel),
                    kind: EdgeKind::Sequential,
                },
            );
        }
        self.local.push_back(kf.id);
        self.keyframes.insert(kf.id, kf);
        let mut promoted = Vec::new();
        while self.local.len() > self.window {
            let id = self.local.pop_front().expect("non-empty window");
            self.promote(id);
            promoted.push(id);
        }
        promoted
    }

    /// Marks the keyframe inactive, adds it to the database and commits its
    /// sequential edge.
    fn promote(&mut self, id: KeyframeId) {
        let kf = self.keyframes.get_mut(&id).expect("promoted keyframe exists");
        kf.active = false;
        self.database.insert(id, kf.bow.clone());
        if let Some(e) = self.pending.remove(&id) {
            self.edges.push(e);
        }
    }

    /// Range from the keyframe's camera centre to a point, i.e. the depth
    /// along the bearing.
    pub fn point_range(&self, kf: &Keyframe, point: MapPointId) -> Option<f64> {
        self.points
            .get(&point)
            .map(|p| kf.pose.transform_point(&p.position).norm())
    }

    /// Grid of map-point depths as seen from a keyframe.
    pub fn depth_grid(&self, kf: &Keyframe, grid: &Grid) -> DepthGrid {
        let mut dg = DepthGrid::new(grid);
        for obs in &kf.observations {
            if let Some(d) = self.point_range(kf, obs.point) {
                dg.insert(obs.pixel, d);
            }
        }
        dg
    }
}

/// Map-point depths bucketed by image grid cell.
#[derive(Debug, Clone)]
pub struct DepthGrid {
    grid: Grid,
    cells: Vec<Vec<(Vector2<f64>, f64)>>,
}

impl DepthGrid {
    pub fn new(grid: &Grid) -> Self {
        DepthGrid {
            grid: grid.clone(),
            cells: vec![Vec::new(); grid.len()],
        }
    }

    pub fn insert(&mut self, pixel: Vector2<f64>, depth: f64) {
        if let Some(c) = self.grid.cell_of(&pixel) {
            self.cells[c].push((pixel, depth));
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cell(&self, col: u32, row: u32) -> &[(Vector2<f64>, f64)] {
        &self.cells[self.grid.index(col, row)]
    }
}
