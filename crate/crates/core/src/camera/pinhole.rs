use nalgebra::{Matrix2x3, Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{in_bounds, CameraError, CameraModel, PalCamera, Projection};

/// Perspective camera. `mount` rotates pinhole-frame vectors (x right, y down,
/// z along the view direction) into the panoramic camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    width: u32,
    height: u32,
    focal: f64,
    cx: f64,
    cy: f64,
    mount: UnitQuaternion<f64>,
}

impl PinholeCamera {
    /// Square-pixel camera with the given horizontal field of view, principal
    /// point at the image centre and identity mount.
    pub fn with_hfov(width: u32, height: u32, hfov: f64) -> Result<Self, CameraError> {
        if width == 0 || height == 0 || !(hfov > 0.0 && hfov < std::f64::consts::PI) {
            return Err(CameraError::InvalidParameters(
                "pinhole needs positive size and 0 < hfov < pi".into(),
            ));
        }
        Ok(PinholeCamera {
            width,
            height,
            focal: width as f64 / (2.0 * (hfov / 2.0).tan()),
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            mount: UnitQuaternion::identity(),
        })
    }

    /// Re-aims the camera at the panoramic-frame direction with the given
    /// azimuth and polar angle, keeping the image rows level with the
    /// panoramic optical axis as "up".
    pub fn looking_at(mut self, azimuth: f64, polar: f64) -> Self {
        let dir = Vector3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos());
        let right = dir.cross(&Vector3::z()).normalize();
        let down = dir.cross(&right);
        let m = Matrix3::from_columns(&[right, down, dir]);
        self.mount = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
        self
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn hfov(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.focal)).atan()
    }

    pub fn mount(&self) -> &UnitQuaternion<f64> {
        &self.mount
    }

    /// View direction in the panoramic frame.
    pub fn view_direction(&self) -> Vector3<f64> {
        self.mount * Vector3::z()
    }
}

impl CameraModel for PinholeCamera {
    fn width(&self) -> u32 {
        self.width
    }

    fn height(&self) -> u32 {
        self.height
    }

    /// Projects a point given in the pinhole's own frame.
    fn project(&self, p: &Vector3<f64>) -> Result<Projection, CameraError> {
        if !(p.norm() > 0.0) {
            return Err(CameraError::ZeroNorm);
        }
        if p.z <= 0.0 {
            return Ok(Projection {
                pixel: Vector2::new(f64::NAN, f64::NAN),
                valid: false,
            });
        }
        let pixel = Vector2::new(self.cx + self.focal * p.x / p.z, self.cy + self.focal * p.y / p.z);
        Ok(Projection {
            valid: in_bounds(&pixel, self.width, self.height),
            pixel,
        })
    }

    fn back_project(&self, pixel: &Vector2<f64>) -> Result<Vector3<f64>, CameraError> {
        if !in_bounds(pixel, self.width, self.height) {
            return Err(CameraError::OutOfFov(pixel.x, pixel.y));
        }
        Ok(Vector3::new((pixel.x - self.cx) / self.focal, (pixel.y - self.cy) / self.focal, 1.0).normalize())
    }

    fn project_jacobian(&self, p: &Vector3<f64>) -> Result<Matrix2x3<f64>, CameraError> {
        if !(p.z > 0.0) {
            return Err(CameraError::ZeroNorm);
        }
        let iz = 1.0 / p.z;
        let f = self.focal;
        Ok(Matrix2x3::new(
            f * iz,
            0.0,
            -f * p.x * iz * iz,
            0.0,
            f * iz,
            -f * p.y * iz * iz,
        ))
    }

    fn pixel_in_view(&self, pixel: &Vector2<f64>) -> bool {
        in_bounds(pixel, self.width, self.height)
    }
}

/// A pinhole window resampled from a panoramic camera. Points and bearings are
/// expressed in the panoramic frame; a point is visible only if both the
/// pinhole and the annulus see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualPinhole {
    pub pal: PalCamera,
    pub pinhole: PinholeCamera,
}

impl Default for VirtualPinhole {
    /// 480×480, 90° horizontal FOV, looking along +x at the horizon.
    fn default() -> Self {
        VirtualPinhole {
            pal: PalCamera::default(),
            pinhole: PinholeCamera::with_hfov(480, 480, std::f64::consts::FRAC_PI_2)
                .expect("valid default")
                .looking_at(0.0, std::f64::consts::FRAC_PI_2),
        }
    }
}

impl VirtualPinhole {
    fn to_pinhole(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pinhole.mount.inverse() * p
    }
}

impl CameraModel for VirtualPinhole {
    fn width(&self) -> u32 {
        self.pinhole.width
    }

    fn height(&self) -> u32 {
        self.pinhole.height
    }

    fn project(&self, p: &Vector3<f64>) -> Result<Projection, CameraError> {
        let mut proj = self.pinhole.project(&self.to_pinhole(p))?;
        proj.valid = proj.valid && self.pal.project(p)?.valid;
        Ok(proj)
    }

    fn back_project(&self, pixel: &Vector2<f64>) -> Result<Vector3<f64>, CameraError> {
        let b = self.pinhole.mount * self.pinhole.back_project(pixel)?;
        let theta = (b.x * b.x + b.y * b.y).sqrt().atan2(b.z);
        if !self.pal.theta_in_fov(theta) {
            return Err(CameraError::OutOfFov(pixel.x, pixel.y));
        }
        Ok(b)
    }

    fn project_jacobian(&self, p: &Vector3<f64>) -> Result<Matrix2x3<f64>, CameraError> {
        let r = self.pinhole.mount.to_rotation_matrix().into_inner();
        Ok(self.pinhole.project_jacobian(&self.to_pinhole(p))? * r.transpose())
    }

    fn pixel_in_view(&self, pixel: &Vector2<f64>) -> bool {
        self.back_project(pixel).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn default_has_ninety_degree_hfov() {
        let v = VirtualPinhole::default();
        assert!((v.pinhole.hfov() - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn looking_at_aims_the_centre_pixel() {
        for &(az, polar) in &[(0.0, FRAC_PI_2), (PI, 1.2), (-2.0, 1.0)] {
            let v = VirtualPinhole {
                pal: PalCamera::default(),
                pinhole: PinholeCamera::with_hfov(480, 480, FRAC_PI_2).unwrap().looking_at(az, polar),
            };
            let dir = Vector3::new(polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos());
            let proj = v.project(&(dir * 3.0)).unwrap();
            assert!(proj.valid);
            assert!((proj.pixel - Vector2::new(239.5, 239.5)).norm() < 1e-9);
            // Image "up" (negative row) is toward the panoramic optical axis.
            let up = v.project(&(dir * 3.0 + Vector3::z() * 0.1)).unwrap();
            assert!(up.pixel.y < 239.5);
        }
    }

    #[test]
    fn behind_is_invalid_and_round_trip_holds() {
        let v = VirtualPinhole::default();
        assert!(!v.project(&Vector3::new(-2.0, 0.1, 0.0)).unwrap().valid);
        let p = Vector3::new(4.0, 1.0, 0.8);
        let proj = v.project(&p).unwrap();
        let b = v.back_project(&proj.pixel).unwrap();
        assert!((b - p.normalize()).norm() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let v = VirtualPinhole {
            pal: PalCamera::default(),
            pinhole: PinholeCamera::with_hfov(480, 480, FRAC_PI_2).unwrap().looking_at(0.7, 1.3),
        };
        let p = Vector3::new(2.0, 1.9, 0.9);
        let j = v.project_jacobian(&p).unwrap();
        let h = 1e-6;
        for c in 0..3 {
            let mut dp = Vector3::zeros();
            dp[c] = h;
            let fd = (v.project(&(p + dp)).unwrap().pixel - v.project(&(p - dp)).unwrap().pixel) / (2.0 * h);
            assert!((j.column(c) - fd).norm() < 1e-5 * (1.0 + fd.norm()));
        }
    }
}
