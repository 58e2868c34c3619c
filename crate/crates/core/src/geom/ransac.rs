//! Generic RANSAC driver with a fixed iteration budget and caller-supplied seed.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A minimal-sample model estimator.
pub trait Estimator {
    type Datum;
    type Model: Clone;

    fn min_samples(&self) -> usize;

    /// Fits a model to exactly `min_samples` data; `None` if the sample is degenerate.
    fn fit(&self, sample: &[&Self::Datum]) -> Option<Self::Model>;

    fn residual(&self, model: &Self::Model, datum: &Self::Datum) -> f64;

    /// Optional least-squares refinement on the full inlier set.
    fn refit(&self, _inliers: &[&Self::Datum]) -> Option<Self::Model> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub iterations: usize,
    pub threshold: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            iterations: 200,
            threshold: 1.0,
            min_inliers: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RansacResult<M> {
    pub model: M,
    pub inlier_mask: Vec<bool>,
    pub inlier_count: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RansacError {
    #[error("need at least {needed} data, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("best hypothesis has {best} inliers, need {required}")]
    VerificationFailed { best: usize, required: usize },
}

const MAX_REFITS: usize = 10;

fn score<E: Estimator>(est: &E, model: &E::Model, data: &[E::Datum], threshold: f64) -> (Vec<bool>, usize) {
    let mask: Vec<bool> = data
        .iter()
        .map(|d| {
            let r = est.residual(model, d);
            r.is_finite() && r <= threshold
        })
        .collect();
    let count = mask.iter().filter(|&&b| b).count();
    (mask, count)
}

/// Runs exactly `params.iterations` hypotheses and keeps the one with the most
/// inliers (first found wins ties). The winner is then refit on its inliers,
/// if the estimator supports it, and rescored; this repeats (at most
/// `MAX_REFITS` times) while the inlier count keeps growing.
pub fn ransac<E: Estimator>(
    est: &E,
    data: &[E::Datum],
    params: &RansacParams,
) -> Result<RansacResult<E::Model>, RansacError> {
    let k = est.min_samples();
    if data.len() < k || k == 0 {
        return Err(RansacError::InsufficientData {
            needed: k.max(1),
            got: data.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(E::Model, Vec<bool>, usize)> = None;
    let mut picked: Vec<&E::Datum> = Vec::with_capacity(k);
    for _ in 0..params.iterations {
        picked.clear();
        picked.extend(sample(&mut rng, data.len(), k).iter().map(|i| &data[i]));
        let Some(model) = est.fit(&picked) else {
            continue;
        };
        let (mask, count) = score(est, &model, data, params.threshold);
        if best.as_ref().is_none_or(|b| count > b.2) {
            best = Some((model, mask, count));
        }
    }
    let Some((mut model, mut mask, mut count)) = best else {
        return Err(RansacError::VerificationFailed {
            best: 0,
            required: params.min_inliers,
        });
    };
    for _ in 0..MAX_REFITS {
        if count < k {
            break;
        }
        let inliers: Vec<&E::Datum> = data.iter().zip(&mask).filter(|(_, &m)| m).map(|(d, _)| d).collect();
        let Some(refined) = est.refit(&inliers) else { break };
        let (m2, c2) = score(est, &refined, data, params.threshold);
        if c2 < count {
            break;
        }
        let grew = c2 > count;
        model = refined;
        mask = m2;
        count = c2;
        if !grew {
            break;
        }
    }
    if count < params.min_inliers {
        return Err(RansacError::VerificationFailed {
            best: count,
            required: params.min_inliers,
        });
    }
    Ok(RansacResult {
        model,
        inlier_mask: mask,
        inlier_count: count,
    })
}
