use serde::{Deserialize, Serialize};
use std::io::Write;

/// One loop query: the frame index and the best candidate returned, with its
/// detection score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub query: usize,
    pub candidate: Option<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    /// Interpolated: the best raw precision at this or any looser threshold.
    pub precision: f64,
    pub raw_precision: f64,
    pub recall: f64,
}

/// Sweeps the score threshold over every distinct detection score, strictest
/// first. A detection at or above the threshold is a true positive when its
/// index differs from the query's by less than `interval`; queries without
/// an accepted detection are false negatives. Without any detection the
/// curve is the single point P = 1, R = 0.
pub fn precision_recall(records: &[DetectionRecord], interval: usize) -> Vec<PrPoint> {
    let mut thresholds: Vec<f64> = records
        .iter()
        .filter(|r| r.candidate.is_some())
        .map(|r| r.score)
        .collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    if thresholds.is_empty() {
        return vec![PrPoint {
            threshold: f64::INFINITY,
            precision: 1.0,
            raw_precision: 1.0,
            recall: 0.0,
        }];
    }
    let mut points: Vec<PrPoint> = thresholds
        .iter()
        .map(|&th| {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for r in records {
                match r.candidate {
                    Some(c) if r.score >= th => {
                        if c.abs_diff(r.query) < interval {
                            tp += 1;
                        } else {
                            fp += 1;
                        }
                    }
                    _ => fn_ += 1,
                }
            }
            let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            PrPoint {
                threshold: th,
                precision,
                raw_precision: precision,
                recall,
            }
        })
        .collect();
    let mut best: f64 = 0.0;
    for p in points.iter_mut().rev() {
        best = best.max(p.raw_precision);
        p.precision = best;
    }
    points
}

/// Highest recall among thresholds with no false positive.
pub fn recall_at_full_precision(curve: &[PrPoint]) -> f64 {
    curve
        .iter()
        .filter(|p| p.raw_precision >= 1.0)
        .map(|p| p.recall)
        .fold(0.0, f64::max)
}

pub fn write_pr_csv<W: Write>(mut w: W, curve: &[PrPoint]) -> std::io::Result<()> {
    writeln!(w, "threshold,precision,recall")?;
    for p in curve {
        writeln!(w, "{},{},{}", p.threshold, p.precision, p.recall)?;
    }
    Ok(())
}
