use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{EvalError, Trajectory};
use crate::geom::{horn_align, Sim3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Largest timestamp difference for an estimate/ground-truth pair (s).
    pub max_time_gap: f64,
    /// Fraction of the associated poses forming the beginning and end
    /// alignment segments.
    pub segment_fraction: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_time_gap: 0.05,
            segment_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub accumulated_error: f64,
    pub scale_drift: f64,
    pub loop_closure_error_pct: f64,
    /// RMS position error after aligning the whole estimate.
    pub ate_rmse: f64,
    pub associated: usize,
}

/// Pairs `(estimate index, ground-truth index)` by nearest timestamp, keeping
/// pairs within `max_gap`.
pub fn associate(est: &Trajectory, gt: &Trajectory, max_gap: f64) -> Vec<(usize, usize)> {
    let gts: Vec<f64> = gt.timestamps().collect();
    let mut out = Vec::new();
    if gts.is_empty() {
        return out;
    }
    for (i, t) in est.timestamps().enumerate() {
        let j = gts.partition_point(|&g| g < t);
        let best = [j.checked_sub(1), (j < gts.len()).then_some(j)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (gts[a] - t).abs().total_cmp(&(gts[b] - t).abs()))
            .expect("non-empty");
        if (gts[best] - t).abs() <= max_gap {
            out.push((i, best));
        }
    }
    out
}

/// Similarity `S` minimizing `Σ |S·p_i − p'_i|²` over the segment, mapping
/// estimated positions onto ground truth.
pub fn align_segment(est: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<Sim3, EvalError> {
    horn_align(est, gt)
        .map(|a| a.transform)
        .map_err(|e| EvalError::Degenerate(e.to_string()))
}

/// RMS over all positions of `|S_b·p − S_e·p|`.
pub fn accumulated_error(positions: &[Vector3<f64>], s_b: &Sim3, s_e: &Sim3) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let sum: f64 = positions
        .iter()
        .map(|p| (s_b.transform_point(p) - s_e.transform_point(p)).norm_squared())
        .sum();
    (sum / positions.len() as f64).sqrt()
}

/// `|ln scale(S_b · S_e⁻¹)|`.
pub fn scale_drift(s_b: &Sim3, s_e: &Sim3) -> f64 {
    s_b.compose(&s_e.inverse()).scale().ln().abs()
}

/// Gap between first and last position as a percentage of the path length.
pub fn loop_closure_error_pct(positions: &[Vector3<f64>]) -> Result<f64, EvalError> {
    let length: f64 = positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if !(length > 0.0) {
        return Err(EvalError::ZeroLength);
    }
    let gap = (positions[positions.len() - 1] - positions[0]).norm();
    Ok(100.0 * gap / length)
}

/// RMS position error after Sim(3) alignment of the whole estimate.
pub fn ate(est: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64, EvalError> {
    let s = align_segment(est, gt)?;
    let sum: f64 = est
        .iter()
        .zip(gt)
        .map(|(p, q)| (s.transform_point(p) - q).norm_squared())
        .sum();
    Ok((sum / est.len() as f64).sqrt())
}

/// Drift metrics of an estimate against ground truth. Beginning and end
/// alignments use the first and last `segment_fraction` of associated poses
/// (at least 3 each).
pub fn evaluate_trajectories(
    est: &Trajectory,
    gt: &Trajectory,
    opts: &EvalOptions,
) -> Result<TrajectoryMetrics, EvalError> {
    let pairs = associate(est, gt, opts.max_time_gap);
    if pairs.len() < 3 {
        return Err(EvalError::TooFewPoses(pairs.len()));
    }
    let ep = est.positions();
    let gp = gt.positions();
    let e: Vec<Vector3<f64>> = pairs.iter().map(|&(i, _)| ep[i]).collect();
    let g: Vec<Vector3<f64>> = pairs.iter().map(|&(_, j)| gp[j]).collect();
    let n = pairs.len();
    let seg = ((opts.segment_fraction * n as f64).ceil() as usize).clamp(3, n);
    let s_b = align_segment(&e[..seg], &g[..seg])?;
    let s_e = align_segment(&e[n - seg..], &g[n - seg..])?;
    Ok(TrajectoryMetrics {
        accumulated_error: accumulated_error(&ep, &s_b, &s_e),
        scale_drift: scale_drift(&s_b, &s_e),
        loop_closure_error_pct: loop_closure_error_pct(&ep)?,
        ate_rmse: ate(&e, &g)?,
        associated: n,
    })
}
