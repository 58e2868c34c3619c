//! Map bookkeeping, Sim(3) pose-graph optimization and global bundle
//! adjustment.

mod ba;
mod fold;
mod linear;
mod map;
mod pose_graph;

pub use ba::{global_ba, reprojection_jacobians, BaParams, BaStats};
pub use fold::fold_sim3_into_map;
pub use map::{DepthGrid, EdgeKind, GraphEdge, Keyframe, MapPoint, Observation, SlamMap};
pub use pose_graph::{edge_residual, optimize_pose_graph, OptimizationStats, PgoParams, PoseGraph, PoseGraphEdge};

use crate::ids::KeyframeId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("pose graph has no fixed vertex")]
    NoFixedVertex,
    #[error("vertex {0} is not connected to any fixed vertex")]
    Disconnected(KeyframeId),
    #[error("edge references unknown vertex {0}")]
    UnknownVertex(KeyframeId),
    #[error("residual undefined at the current estimate")]
    InvalidResidual,
}
