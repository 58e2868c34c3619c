//! Transform types, closed-form similarity alignment and RANSAC.

mod horn;
mod lie;
mod ransac;

pub use horn::{horn_align, Alignment};
pub use lie::{hat, so3_exp, so3_log, Sim3, Tangent7, Vector7, SE3};
pub use ransac::{ransac, Estimator, RansacError, RansacParams, RansacResult};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("rotation angle is at pi; logarithm is ambiguous")]
    RotationAtPi,
    #[error("scale must be positive and finite, got {0}")]
    NonPositiveScale(f64),
    #[error("quaternion has zero norm")]
    InvalidQuaternion,
    #[error("singular translation map")]
    Singular,
    #[error("need at least {needed} point pairs, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("source and destination lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate point configuration (collinear or coincident)")]
    Degenerate,
}
