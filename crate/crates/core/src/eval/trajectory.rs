use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use std::fmt::Write as _;
use std::path::Path;

use super::EvalError;
use crate::geom::SE3;

/// Timestamped world-from-camera poses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    entries: Vec<(f64, SE3)>,
}

impl Trajectory {
    pub fn new(entries: Vec<(f64, SE3)>) -> Result<Self, EvalError> {
        if let Some(i) = entries.windows(2).position(|w| !(w[1].0 > w[0].0)) {
            return Err(EvalError::NonIncreasing(i + 1));
        }
        Ok(Trajectory { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(f64, SE3)] {
        &self.entries
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.entries.iter().map(|e| *e.1.translation()).collect()
    }

    /// Parses `timestamp tx ty tz qx qy qz qw` lines; blank lines and `#`
    /// comments are skipped.
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| EvalError::Parse { line: i + 1, message };
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            if v.len() != 8 {
                return Err(err(format!("expected 8 fields, found {}", v.len())));
            }
            let q = Quaternion::new(v[7], v[4], v[5], v[6]);
            if !(q.norm() > 1e-9) {
                return Err(err("zero quaternion".into()));
            }
            let pose = SE3::new(UnitQuaternion::from_quaternion(q), Vector3::new(v[1], v[2], v[3]));
            entries.push((v[0], pose));
        }
        Trajectory::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, p) in &self.entries {
            let (q, x) = (p.rotation(), p.translation());
            writeln!(s, "{} {} {} {} {} {} {} {}", t, x.x, x.y, x.z, q.i, q.j, q.k, q.w).expect("string write");
        }
        s
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Trajectory::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Sum of distances between consecutive positions.
    pub fn path_length(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| (w[1].1.translation() - w[0].1.translation()).norm())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let t = Trajectory::new(vec![
            (0.0, SE3::identity()),
            (0.5, SE3::new(UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3), Vector3::new(1.0, -2.0, 0.25))),
        ])
        .unwrap();
        let back = Trajectory::parse(&t.to_text()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in t.entries().iter().zip(back.entries()) {
            assert_eq!(a.0, b.0);
            assert!(a.1.approx_eq(&b.1, 1e-12));
        }
    }

    #[test]
    fn rejects_repeated_timestamps() {
        let e = Trajectory::new(vec![(1.0, SE3::identity()), (1.0, SE3::identity())]);
        assert!(matches!(e, Err(EvalError::NonIncreasing(1))));
    }

    #[test]
    fn reports_bad_lines() {
        let e = Trajectory::parse("# header\n0 0 0 0 0 0 0 1\n1 0 0\n").unwrap_err();
        assert!(matches!(e, EvalError::Parse { line: 3, .. }));
    }
}
