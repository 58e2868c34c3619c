//! Panoramic annular camera (F-Theta law), perspective pinhole camera and
//! virtual-pinhole reprojection.
//!
//! The panoramic camera frame has its optical axis along +z. Polar angle θ is
//! measured from +z and azimuth φ = atan2(y, x). With the lens pointing up on
//! a vehicle, x is the direction of travel, y points left and z up, so the
//! annulus covers everything from 60° above to 2° below the horizon.

mod calib;
mod pal;
mod pinhole;
mod reproject;

pub use calib::{load_calibration, parse_calibration};
pub use pal::{PalCamera, RadialLaw};
pub use pinhole::{PinholeCamera, VirtualPinhole};
pub use reproject::{reproject_to_pinhole, PinholeImage};

use nalgebra::{Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("cannot project a point at the camera center")]
    ZeroNorm,
    #[error("pixel ({0:.2}, {1:.2}) is outside the field of view")]
    OutOfFov(f64, f64),
    #[error("invalid camera parameters: {0}")]
    InvalidParameters(String),
    #[error("calibration file: {0}")]
    Calibration(String),
}

/// Pixel position of a projected point. `valid` is false when the ray falls
/// outside the imaged field of view; the pixel is still reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub valid: bool,
}

pub trait CameraModel {
    fn width(&self) -> u32;
    fn height(&self) -> u32;
    fn project(&self, p: &Vector3<f64>) -> Result<Projection, CameraError>;
    /// Unit bearing in the camera frame.
    fn back_project(&self, pixel: &Vector2<f64>) -> Result<Vector3<f64>, CameraError>;
    /// Derivative of the pixel with respect to the camera-frame point.
    fn project_jacobian(&self, p: &Vector3<f64>) -> Result<Matrix2x3<f64>, CameraError>;
    /// True if the pixel lies in the region that carries image content.
    fn pixel_in_view(&self, pixel: &Vector2<f64>) -> bool;
}

/// Either the full panoramic annulus or a perspective window cut from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Camera {
    Panoramic(PalCamera),
    VirtualPinhole(VirtualPinhole),
}

impl CameraModel for Camera {
    fn width(&self) -> u32 {
        match self {
            Camera::Panoramic(c) => c.width(),
            Camera::VirtualPinhole(c) => c.width(),
        }
    }

    fn height(&self) -> u32 {
        match self {
            Camera::Panoramic(c) => c.height(),
            Camera::VirtualPinhole(c) => c.height(),
        }
    }

    fn project(&self, p: &Vector3<f64>) -> Result<Projection, CameraError> {
        match self {
            Camera::Panoramic(c) => c.project(p),
            Camera::VirtualPinhole(c) => c.project(p),
        }
    }

    fn back_project(&self, pixel: &Vector2<f64>) -> Result<Vector3<f64>, CameraError> {
        match self {
            Camera::Panoramic(c) => c.back_project(pixel),
            Camera::VirtualPinhole(c) => c.back_project(pixel),
        }
    }

    fn project_jacobian(&self, p: &Vector3<f64>) -> Result<Matrix2x3<f64>, CameraError> {
        match self {
            Camera::Panoramic(c) => c.project_jacobian(p),
            Camera::VirtualPinhole(c) => c.project_jacobian(p),
        }
    }

    fn pixel_in_view(&self, pixel: &Vector2<f64>) -> bool {
        match self {
            Camera::Panoramic(c) => c.pixel_in_view(pixel),
            Camera::VirtualPinhole(c) => c.pixel_in_view(pixel),
        }
    }
}

fn in_bounds(pixel: &Vector2<f64>, width: u32, height: u32) -> bool {
    pixel.x >= -0.5 && pixel.y >= -0.5 && pixel.x <= width as f64 - 0.5 && pixel.y <= height as f64 - 0.5
}
