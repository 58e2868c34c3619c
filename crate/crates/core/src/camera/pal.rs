use nalgebra::{Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use super::{in_bounds, CameraError, CameraModel, Projection};

/// Image radius as a function of polar angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadialLaw {
    /// `r = k·θ`.
    FTheta { k: f64 },
    /// `r = Σ aᵢ θ^(2i+1)`.
    OddPolynomial { coeffs: Vec<f64> },
}

impl RadialLaw {
    pub fn radius(&self, theta: f64) -> f64 {
        match self {
            RadialLaw::FTheta { k } => k * theta,
            RadialLaw::OddPolynomial { coeffs } => {
                let t2 = theta * theta;
                coeffs.iter().rev().fold(0.0, |acc, a| acc * t2 + a) * theta
            }
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match self {
            RadialLaw::FTheta { k } => *k,
            RadialLaw::OddPolynomial { coeffs } => {
                let t2 = theta * theta;
                let mut pow = 1.0;
                let mut sum = 0.0;
                for (i, a) in coeffs.iter().enumerate() {
                    sum += (2 * i + 1) as f64 * a * pow;
                    pow *= t2;
                }
                sum
            }
        }
    }
}

/// Panoramic annular camera with an F-Theta (or odd-polynomial) radial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalCamera {
    width: u32,
    height: u32,
    cx: f64,
    cy: f64,
    law: RadialLaw,
    theta_min: f64,
    theta_max: f64,
}

impl Default for PalCamera {
    /// 720×720, θ ∈ [30°, 92°], ideal F-Theta with r(92°) = 355 px.
    fn default() -> Self {
        let theta_max = 92f64.to_radians();
        PalCamera::new(
            720,
            720,
            359.5,
            359.5,
            RadialLaw::FTheta { k: 355.0 / theta_max },
            30f64.to_radians(),
            theta_max,
        )
        .expect("default camera is valid")
    }
}

/// How far past the horizon the annulus may extend.
const HORIZON_MARGIN: f64 = 0.35;

impl PalCamera {
    pub fn new(
        width: u32,
        height: u32,
        cx: f64,
        cy: f64,
        law: RadialLaw,
        theta_min: f64,
        theta_max: f64,
    ) -> Result<Self, CameraError> {
        let bad = |msg: &str| Err(CameraError::InvalidParameters(msg.to_string()));
        if width == 0 || height == 0 {
            return bad("image size must be positive");
        }
        if !(0.0 < theta_min && theta_min < theta_max && theta_max < FRAC_PI_2 + HORIZON_MARGIN) {
            return bad("need 0 < theta_min < theta_max < pi/2 + margin");
        }
        if let RadialLaw::OddPolynomial { coeffs } = &law {
            if coeffs.is_empty() {
                return bad("polynomial needs at least one coefficient");
            }
        }
        // Radius must grow monotonically over the band so the law is invertible.
        let steps = 256;
        for i in 0..=steps {
            let t = theta_min + (theta_max - theta_min) * i as f64 / steps as f64;
            if !(law.derivative(t) > 0.0) {
                return bad("radial law is not increasing over the field of view");
            }
        }
        let r_min = law.radius(theta_min);
        let r_max = law.radius(theta_max);
        if !(r_min > 0.0 && r_min < r_max) {
            return bad("annulus radii must satisfy 0 < r(theta_min) < r(theta_max)");
        }
        let fits = cx - r_max >= -0.5
            && cy - r_max >= -0.5
            && cx + r_max <= width as f64 - 0.5
            && cy + r_max <= height as f64 - 0.5;
        if !fits {
            return bad("outer annulus radius does not fit in the image");
        }
        Ok(PalCamera {
            width,
            height,
            cx,
            cy,
            law,
            theta_min,
            theta_max,
        })
    }

    pub fn principal_point(&self) -> Vector2<f64> {
        Vector2::new(self.cx, self.cy)
    }

    pub fn law(&self) -> &RadialLaw {
        &self.law
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.theta_min, self.theta_max)
    }

    /// Inner and outer annulus radii in pixels.
    pub fn annulus(&self) -> (f64, f64) {
        (self.law.radius(self.theta_min), self.law.radius(self.theta_max))
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.law.radius(theta)
    }

    /// Inverse radial law; `None` outside the annulus.
    pub fn theta_of_radius(&self, r: f64) -> Option<f64> {
        let (r_min, r_max) = self.annulus();
        let eps = 1e-9 * r_max;
        if r < r_min - eps || r > r_max + eps {
            return None;
        }
        match &self.law {
            RadialLaw::FTheta { k } => Some(r / k),
            RadialLaw::OddPolynomial { .. } => {
                let mut t = self.theta_min
                    + (self.theta_max - self.theta_min) * (r - r_min) / (r_max - r_min);
                for _ in 0..50 {
                    let step = (self.law.radius(t) - r) / self.law.derivative(t);
                    t = (t - step).clamp(self.theta_min * 0.5, self.theta_max + HORIZON_MARGIN);
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                Some(t)
            }
        }
    }

    pub fn theta_in_fov(&self, theta: f64) -> bool {
        theta >= self.theta_min && theta <= self.theta_max
    }

    /// Largest relative deviation of the radial law from its best-fit straight
    /// line through the origin over the field of view.
    pub fn f_theta_deviation(&self) -> f64 {
        let n = 512;
        let samples: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let t = self.theta_min + (self.theta_max - self.theta_min) * i as f64 / n as f64;
                (t, self.law.radius(t))
            })
            .collect();
        let k = samples.iter().map(|(t, r)| t * r).sum::<f64>()
            / samples.iter().map(|(t, _)| t * t).sum::<f64>();
        samples
            .iter()
            .map(|(t, r)| (r - k * t).abs() / r)
            .fold(0.0, f64::max)
    }
}

impl CameraModel for PalCamera {
    fn width(&self) -> u32 {
        self.width
    }

    fn height(&self) -> u32 {
        self.height
    }

    fn project(&self, p: &Vector3<f64>) -> Result<Projection, CameraError> {
        let norm = p.norm();
        if !(norm > 0.0) {
            return Err(CameraError::ZeroNorm);
        }
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        let theta = rho.atan2(p.z);
        let phi = p.y.atan2(p.x);
        let r = self.law.radius(theta);
        let pixel = Vector2::new(self.cx + r * phi.cos(), self.cy + r * phi.sin());
        let valid = rho > 0.0 && self.theta_in_fov(theta) && in_bounds(&pixel, self.width, self.height);
        Ok(Projection { pixel, valid })
    }

    fn back_project(&self, pixel: &Vector2<f64>) -> Result<Vector3<f64>, CameraError> {
        let d = pixel - self.principal_point();
        let r = d.norm();
        let theta = self
            .theta_of_radius(r)
            .ok_or(CameraError::OutOfFov(pixel.x, pixel.y))?;
        let phi = d.y.atan2(d.x);
        let (st, ct) = theta.sin_cos();
        Ok(Vector3::new(st * phi.cos(), st * phi.sin(), ct))
    }

    fn project_jacobian(&self, p: &Vector3<f64>) -> Result<Matrix2x3<f64>, CameraError> {
        let n2 = p.norm_squared();
        let rho2 = p.x * p.x + p.y * p.y;
        if !(rho2 > 0.0) {
            return Err(CameraError::ZeroNorm);
        }
        let rho = rho2.sqrt();
        let theta = rho.atan2(p.z);
        let r = self.law.radius(theta);
        let dr = self.law.derivative(theta);
        // ∂θ/∂p
        let dtheta = Vector3::new(p.z * p.x / (rho * n2), p.z * p.y / (rho * n2), -rho / n2);
        let (ux, uy) = (p.x / rho, p.y / rho);
        let rho3 = rho2 * rho;
        // ∂(x/ρ)/∂p and ∂(y/ρ)/∂p
        let dux = Vector3::new(p.y * p.y / rho3, -p.x * p.y / rho3, 0.0);
        let duy = Vector3::new(-p.x * p.y / rho3, p.x * p.x / rho3, 0.0);
        let row_u = dtheta * (dr * ux) + dux * r;
        let row_v = dtheta * (dr * uy) + duy * r;
        Ok(Matrix2x3::from_rows(&[row_u.transpose(), row_v.transpose()]))
    }

    fn pixel_in_view(&self, pixel: &Vector2<f64>) -> bool {
        let r = (pixel - self.principal_point()).norm();
        let (r_min, r_max) = self.annulus();
        r >= r_min && r <= r_max && in_bounds(pixel, self.width, self.height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_3;

    fn bearing(theta: f64, phi: f64) -> Vector3<f64> {
        Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    #[test]
    fn default_annulus_matches_design() {
        let cam = PalCamera::default();
        let (r_min, r_max) = cam.annulus();
        assert!((r_max - 355.0).abs() < 1e-9);
        assert!(r_min > 0.0 && r_min < r_max);
        assert_eq!((cam.width(), cam.height()), (720, 720));
    }

    #[test]
    fn horizon_pixel_on_x_axis() {
        let cam = PalCamera::default();
        let RadialLaw::FTheta { k } = *cam.law() else { unreachable!() };
        let px = Vector2::new(359.5 + k * FRAC_PI_2, 359.5);
        let b = cam.back_project(&px).unwrap();
        assert!((b - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn principal_point_is_blind() {
        let cam = PalCamera::default();
        assert!(matches!(
            cam.back_project(&Vector2::new(359.5, 359.5)),
            Err(CameraError::OutOfFov(..))
        ));
    }

    #[test]
    fn forward_axis_is_invalid() {
        let cam = PalCamera::default();
        assert!(!cam.project(&Vector3::new(0.0, 0.0, 3.0)).unwrap().valid);
        assert_eq!(cam.project(&Vector3::zeros()), Err(CameraError::ZeroNorm));
    }

    #[test]
    fn f_theta_definition() {
        let cam = PalCamera::default();
        let RadialLaw::FTheta { k } = *cam.law() else { unreachable!() };
        let phi = 45f64.to_radians();
        let proj = cam.project(&(bearing(FRAC_PI_3, phi) * 2.5)).unwrap();
        assert!(proj.valid);
        let expected = Vector2::new(359.5, 359.5) + Vector2::new(phi.cos(), phi.sin()) * k * FRAC_PI_3;
        assert!((proj.pixel - expected).norm() < 1e-9);
    }

    #[test]
    fn pixel_round_trip() {
        let cam = PalCamera::default();
        let (r_min, r_max) = cam.annulus();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let r = rng.random_range(r_min..r_max);
            let a = rng.random_range(-3.14..3.14f64);
            let px = Vector2::new(359.5 + r * a.cos(), 359.5 + r * a.sin());
            let back = cam.project(&cam.back_project(&px).unwrap()).unwrap();
            assert!(back.valid);
            assert!((back.pixel - px).norm() < 1e-6);
        }
    }

    #[test]
    fn point_round_trip() {
        let cam = PalCamera::default();
        let (t0, t1) = cam.theta_range();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let p = bearing(rng.random_range(t0..t1), rng.random_range(-3.14..3.14)) * rng.random_range(0.1..50.0);
            let proj = cam.project(&p).unwrap();
            assert!(proj.valid);
            let b = cam.back_project(&proj.pixel).unwrap();
            let angle = b.cross(&p.normalize()).norm().asin();
            assert!(angle < 1e-8);
        }
    }

    #[test]
    fn azimuth_preserved_in_both_modes() {
        let poly = PalCamera::new(
            720,
            720,
            359.5,
            359.5,
            RadialLaw::OddPolynomial { coeffs: vec![222.0, -1.5, 0.2] },
            30f64.to_radians(),
            92f64.to_radians(),
        )
        .unwrap();
        for cam in [PalCamera::default(), poly] {
            for i in 0..36 {
                let phi = -3.0 + i as f64 / 6.0;
                let px = cam.project(&bearing(1.2, phi)).unwrap().pixel - Vector2::new(359.5, 359.5);
                assert!((px.y.atan2(px.x) - phi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polynomial_inverse_and_linearity() {
        let ideal = PalCamera::default();
        let RadialLaw::FTheta { k } = *ideal.law() else { unreachable!() };
        let exact = PalCamera::new(
            720,
            720,
            359.5,
            359.5,
            RadialLaw::OddPolynomial { coeffs: vec![k] },
            30f64.to_radians(),
            92f64.to_radians(),
        )
        .unwrap();
        assert!(exact.f_theta_deviation() < 1e-12);
        assert!(ideal.f_theta_deviation() < 1e-12);
        let mild = PalCamera::new(
            720,
            720,
            359.5,
            359.5,
            RadialLaw::OddPolynomial { coeffs: vec![k * 0.995, k * 0.002] },
            30f64.to_radians(),
            92f64.to_radians(),
        )
        .unwrap();
        assert!(mild.f_theta_deviation() < 0.01);
        for i in 0..100 {
            let t = 0.6 + i as f64 * 0.009;
            let r = mild.radius(t);
            assert!((mild.theta_of_radius(r).unwrap() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let cam = PalCamera::default();
        let p = Vector3::new(1.3, -0.7, 0.9);
        let j = cam.project_jacobian(&p).unwrap();
        let h = 1e-6;
        for c in 0..3 {
            let mut dp = Vector3::zeros();
            dp[c] = h;
            let fd = (cam.project(&(p + dp)).unwrap().pixel - cam.project(&(p - dp)).unwrap().pixel) / (2.0 * h);
            assert!((j.column(c) - fd).norm() < 1e-5 * (1.0 + fd.norm()));
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        let law = RadialLaw::FTheta { k: 221.0 };
        assert!(PalCamera::new(720, 720, 359.5, 359.5, law.clone(), 0.0, 1.5).is_err());
        assert!(PalCamera::new(720, 720, 359.5, 359.5, law.clone(), 1.0, 0.8).is_err());
        assert!(PalCamera::new(400, 400, 199.5, 199.5, law, 0.5, 1.6).is_err());
    }
}
