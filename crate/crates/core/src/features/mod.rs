//! Corner detection with rotated binary descriptors, grid-based hybrid
//! keypoint selection and descriptor matching.

mod descriptor;
mod detect;
mod matching;
mod pattern;
mod select;

pub use descriptor::Descriptor;
pub use detect::{detect_corners, detect_corners_with, DetectorParams, Feature};
pub use matching::{match_descriptors, MatchParams};
pub use select::{gradient_magnitude, hybrid_select, Grid, Selection};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeypointKind {
    CornerFeature,
    GradientSupplement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub position: Vector2<f64>,
    pub score: f64,
    pub kind: KeypointKind,
    /// Radians; zero for gradient supplements.
    pub orientation: f64,
}

impl Keypoint {
    pub fn corner(position: Vector2<f64>, score: f64, orientation: f64) -> Self {
        Keypoint {
            position,
            score,
            kind: KeypointKind::CornerFeature,
            orientation,
        }
    }

    pub fn supplement(position: Vector2<f64>, score: f64) -> Self {
        Keypoint {
            position,
            score,
            kind: KeypointKind::GradientSupplement,
            orientation: 0.0,
        }
    }
}
