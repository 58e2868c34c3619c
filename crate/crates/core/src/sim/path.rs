//! Ground-truth paths as polylines sampled at fixed arc-length spacing.

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::SE3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathType {
    /// Rectangle entered mid-side and closed where it started.
    LoopSameDirection,
    /// Stem, rectangle, then the stem again in the opposite direction.
    LoopReverse,
    /// Passes the start again at a right angle.
    LoopPerpendicular,
    /// Two squares meeting at a right-angle crossing.
    FigureEight,
}

/// Waypoints in the ground plane for a path of total length `length`.
pub fn waypoints(kind: PathType, length: f64) -> Vec<Vector2<f64>> {
    let v = Vector2::new;
    match kind {
        PathType::LoopSameDirection => {
            // Starts a twentieth of the length before a corner.
            let (w, h) = (0.3 * length, 0.2 * length);
            let a = w / 2.0 - 0.05 * length;
            vec![v(a, 0.0), v(w / 2.0, 0.0), v(w / 2.0, h), v(-w / 2.0, h), v(-w / 2.0, 0.0), v(a, 0.0)]
        }
        PathType::LoopReverse => {
            let stem = 0.2 * length;
            let (w, h) = (0.18 * length, 0.12 * length);
            vec![
                v(0.0, 0.0),
                v(stem, 0.0),
                v(stem + w, 0.0),
                v(stem + w, h),
                v(stem, h),
                v(stem, 0.0),
                v(0.0, 0.0),
            ]
        }
        PathType::LoopPerpendicular => {
            let (c, t) = (0.2 * length, 0.1 * length);
            vec![v(-t, 0.0), v(c, 0.0), v(c, c), v(0.0, c), v(0.0, -t)]
        }
        PathType::FigureEight => {
            let a = length / 8.0;
            vec![
                v(0.0, 0.0),
                v(a, 0.0),
                v(a, a),
                v(0.0, a),
                v(0.0, -a),
                v(-a, -a),
                v(-a, 0.0),
                v(0.0, 0.0),
            ]
        }
    }
}

/// Polyline with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vector2<f64>>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vector2<f64>>) -> Self {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            cumulative.push(cumulative.last().expect("non-empty") + (w[1] - w[0]).norm());
        }
        Polyline { points, cumulative }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn points(&self) -> &[Vector2<f64>] {
        &self.points
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vector2<f64>, Vector2<f64>)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Position and unit heading at arc length `s`. Vertices take the heading
    /// of the segment leaving them; the final vertex that of the last one.
    pub fn at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        let n = self.points.len() - 1;
        let mut i = self.cumulative.partition_point(|&c| c <= s).saturating_sub(1).min(n - 1);
        while i + 1 < n && self.cumulative[i + 1] - self.cumulative[i] <= 0.0 {
            i += 1;
        }
        let (a, b) = (self.points[i], self.points[i + 1]);
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let dir = (b - a) / len;
        let u = s - self.cumulative[i];
        let pos = if u >= len { b } else { a + dir * u };
        (pos, dir)
    }

    /// Smallest distance from `p` to the polyline.
    pub fn distance(&self, p: &Vector2<f64>) -> f64 {
        self.segments()
            .map(|(a, b)| {
                let d = b - a;
                let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
                (a + d * t - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

const BOB_AMPLITUDE: f64 = 0.2;
const BOB_WAVELENGTH: f64 = 9.0;

/// Camera height over a ground position: a gentle undulation that depends
/// only on where the camera is, so retraced segments coincide.
pub fn camera_height(pos: &Vector2<f64>) -> f64 {
    let k = std::f64::consts::TAU / BOB_WAVELENGTH;
    BOB_AMPLITUDE * ((k * pos.x).sin() + (k * pos.y).sin())
}

/// World-from-camera pose at a ground position facing `heading`: camera x
/// forward, y left, z up.
pub fn pose_at(pos: &Vector2<f64>, heading: &Vector2<f64>) -> SE3 {
    let yaw = heading.y.atan2(heading.x);
    SE3::new(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        Vector3::new(pos.x, pos.y, camera_height(pos)),
    )
}

/// Poses every `spacing` metres along the polyline, including both ends
/// when the length is a multiple of the spacing.
pub fn sample(line: &Polyline, spacing: f64) -> Vec<SE3> {
    let steps = (line.length() / spacing + 1e-9).floor() as usize;
    (0..=steps)
        .map(|k| {
            let (p, d) = line.at(k as f64 * spacing);
            pose_at(&p, &d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_match_request() {
        for kind in [
            PathType::LoopSameDirection,
            PathType::LoopReverse,
            PathType::LoopPerpendicular,
            PathType::FigureEight,
        ] {
            let l = Polyline::new(waypoints(kind, 200.0)).length();
            assert!((l - 200.0).abs() < 1e-9, "{kind:?}: {l}");
        }
    }

    #[test]
    fn headings_follow_segments() {
        let line = Polyline::new(vec![Vector2::new(0.0, 0.0), Vector2::new(2.0, 0.0), Vector2::new(2.0, 3.0)]);
        let (p, d) = line.at(2.0);
        assert_eq!(p, Vector2::new(2.0, 0.0));
        assert_eq!(d, Vector2::new(0.0, 1.0));
        let (p, d) = line.at(5.0);
        assert_eq!(p, Vector2::new(2.0, 3.0));
        assert_eq!(d, Vector2::new(0.0, 1.0));
        assert!((line.distance(&Vector2::new(3.0, 1.0)) - 1.0).abs() < 1e-12);
    }
}
