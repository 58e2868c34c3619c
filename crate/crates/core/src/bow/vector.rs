use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::WordId;

/// Sparse L1-normalized word histogram.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BowVector(BTreeMap<WordId, f64>);

impl BowVector {
    /// Normalizes the given non-negative weights to unit L1 norm; zero or
    /// non-finite weights are dropped.
    pub fn from_weights(weights: BTreeMap<WordId, f64>) -> Self {
        let mut w: BTreeMap<WordId, f64> = weights.into_iter().filter(|(_, v)| v.is_finite() && *v > 0.0).collect();
        let total: f64 = w.values().sum();
        if total > 0.0 {
            w.values_mut().for_each(|v| *v /= total);
        }
        BowVector(w)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, word: WordId) -> Option<f64> {
        self.0.get(&word).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, f64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.values().sum()
    }
}

/// L1 similarity `1 − ½·Σ|v − w|` of two normalized vectors, computed over the
/// shared words as `Σ (|v| + |w| − |v − w|) / 2`. Lies in [0, 1].
pub fn score(v: &BowVector, w: &BowVector) -> f64 {
    let (small, large) = if v.len() <= w.len() { (v, w) } else { (w, v) };
    let mut s = 0.0;
    for (word, a) in small.iter() {
        if let Some(b) = large.get(word) {
            s += (a.abs() + b.abs() - (a - b).abs()) / 2.0;
        }
    }
    s.clamp(0.0, 1.0)
}
