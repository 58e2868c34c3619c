//! Loop closure: retrieval, descriptor matching, epipolar verification,
//! depth lookup and Sim(3) estimation.

mod depth;
mod detect;
mod epipolar;
mod sim3;

pub use depth::approximate_depth;
pub use detect::{detect_loop, excluded_ids, CandidateStatus, LoopCandidate, LoopDetection, LoopParams};
pub use epipolar::{
    eight_point, epipolar_residual, essential_from_motion, geometric_check, BearingPair, EpipolarParams,
    EpipolarResult,
};
pub use sim3::{compute_sim3, estimate_sim3, PointPair, Sim3Constraint, Sim3Estimate, Sim3Params};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason", content = "count")]
pub enum LoopRejection {
    #[error("only {0} matches (need 8)")]
    InsufficientMatches(usize),
    #[error("degenerate bearing configuration")]
    Degenerate,
    #[error("only {0} epipolar inliers")]
    TooFewInliers(usize),
    #[error("only {0} matches with depth")]
    InsufficientDepth(usize),
    #[error("only {0} Sim(3) inliers")]
    TooFewSim3Inliers(usize),
}
