use serde::{Deserialize, Serialize};

use super::Descriptor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Best distance must be strictly below `ratio ×` second-best.
    pub ratio: f64,
    /// Absolute Hamming cutoff; `None` disables it.
    pub max_distance: Option<u32>,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            ratio: 0.8,
            max_distance: Some(50),
        }
    }
}

/// Best and second-best distance from `d` into `set`; ties keep the lowest index.
fn nearest(d: &Descriptor, set: &[Descriptor]) -> (usize, u32, u32) {
    let mut best = (usize::MAX, u32::MAX);
    let mut second = u32::MAX;
    for (j, e) in set.iter().enumerate() {
        let dist = d.hamming(e);
        if dist < best.1 {
            second = best.1;
            best = (j, dist);
        } else if dist < second {
            second = dist;
        }
    }
    (best.0, best.1, second)
}

fn passes_ratio(best: u32, second: u32, ratio: f64) -> bool {
    second == u32::MAX || (best as f64) < ratio * second as f64
}

/// Mutual nearest neighbours in Hamming distance that pass the ratio test in
/// both directions and the optional distance cutoff. Returns `(index in a,
/// index in b)` pairs ordered by index in `a`.
pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], params: &MatchParams) -> Vec<(usize, usize)> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let back: Vec<(usize, u32, u32)> = b.iter().map(|d| nearest(d, a)).collect();
    let mut out = Vec::new();
    for (i, d) in a.iter().enumerate() {
        let (j, dist, second) = nearest(d, b);
        if back[j].0 != i {
            continue;
        }
        if params.max_distance.is_some_and(|m| dist > m) {
            continue;
        }
        if passes_ratio(dist, second, params.ratio) && passes_ratio(back[j].1, back[j].2, params.ratio) {
            out.push((i, j));
        }
    }
    out
}
