//! Place-recognition precision/recall over a revisited sequence.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::bow::{BowDatabase, Vocabulary};
use crate::features::{match_descriptors, Descriptor, MatchParams};
use crate::loop_closure::{geometric_check, BearingPair, EpipolarParams};
use crate::eval::{precision_recall, recall_at_full_precision, DetectionRecord, PrPoint};
use crate::geom::SE3;
use crate::ids::KeyframeId;
use crate::sim::{mix_seed, PathType, Scenario, ScenarioConfig, SimObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrExperimentConfig {
    /// First traversal; `keyframe_spacing` is the frame spacing here.
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub budgets: Vec<usize>,
    /// Every `keyframe_interval`-th first-pass frame goes into the database,
    /// and a detection counts as correct when its frame index is less than
    /// this far from the query's.
    pub keyframe_interval: usize,
    /// Query every `query_stride`-th frame of the second traversal.
    pub query_stride: usize,
    /// Sideways displacement of the second traversal (m).
    pub revisit_offset: f64,
    /// Report a detection only if the top candidate passes descriptor
    /// matching and the epipolar check.
    pub verify: bool,
    pub matching: MatchParams,
    pub epipolar: EpipolarParams,
}

impl Default for PrExperimentConfig {
    fn default() -> Self {
        PrExperimentConfig {
            scenario: ScenarioConfig {
                path: PathType::LoopSameDirection,
                length: 200.0,
                keyframe_spacing: 0.2,
                noise_bits: 16,
                ..ScenarioConfig::default()
            },
            seed: 0,
            budgets: vec![100, 200, 400, 800, 1600],
            keyframe_interval: 30,
            query_stride: 3,
            revisit_offset: 0.3,
            verify: true,
            matching: MatchParams::default(),
            epipolar: EpipolarParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrCurve {
    pub budget: usize,
    pub curve: Vec<PrPoint>,
    pub recall_at_full_precision: f64,
    pub records: Vec<DetectionRecord>,
}

struct View {
    descriptors: Vec<Descriptor>,
    bearings: Vec<Vector3<f64>>,
}

fn strongest(obs: Vec<SimObservation>, budget: usize) -> View {
    let obs = &obs[..budget.min(obs.len())];
    View {
        descriptors: obs.iter().map(|o| o.descriptor).collect(),
        bearings: obs.iter().map(|o| o.bearing).collect(),
    }
}

fn verified(reference: &View, current: &View, config: &PrExperimentConfig) -> bool {
    let pairs: Vec<BearingPair> = match_descriptors(&reference.descriptors, &current.descriptors, &config.matching)
        .into_iter()
        .map(|(a, b)| (reference.bearings[a], current.bearings[b]))
        .collect();
    geometric_check(&pairs, &config.epipolar).is_ok()
}

/// Second-traversal pose for frame `k`: the first-pass pose shifted
/// sideways in the camera frame.
pub fn revisit_pose(scenario: &Scenario, k: usize, offset: f64) -> SE3 {
    let (_, pose) = scenario.ground_truth.entries()[k];
    let side = pose.rotation() * Vector3::new(0.0, offset, 0.0);
    SE3::new(*pose.rotation(), pose.translation() + side)
}

/// For each budget: database from every `keyframe_interval`-th first-pass
/// frame, one top-1 query per strided second-pass frame (dropped if it fails
/// verification), then the PR curve over the BoW score threshold.
pub fn run_pr_experiment(scenario: &Scenario, vocabulary: &Vocabulary, config: &PrExperimentConfig) -> Vec<PrCurve> {
    let interval = config.keyframe_interval.max(1);
    // The loop closes on itself: frames within one interval of the end see
    // the start again and would confuse the index-difference rule.
    let n = scenario.ground_truth.len().saturating_sub(interval);
    let stride = config.query_stride.max(1);
    let none = BTreeSet::new();
    config
        .budgets
        .iter()
        .map(|&budget| {
            let mut db = BowDatabase::new();
            let mut views = BTreeMap::new();
            for k in (0..n).step_by(interval) {
                let view = strongest(scenario.observe(k), budget);
                db.insert(KeyframeId(k as u32), vocabulary.transform(&view.descriptors));
                views.insert(k, view);
            }
            let records: Vec<DetectionRecord> = (0..n)
                .step_by(stride)
                .map(|k| {
                    let pose = revisit_pose(scenario, k, config.revisit_offset);
                    let seed = mix_seed(scenario.frame_seed(k), 0x5ec0);
                    let view = strongest(scenario.observe_from(&pose, seed), budget);
                    let v = vocabulary.transform(&view.descriptors);
                    let top = db.query(&v, 1, &none).first().copied().filter(|&(id, _)| {
                        !config.verify || verified(&views[&(id.0 as usize)], &view, config)
                    });
                    match top {
                        Some((id, score)) => DetectionRecord {
                            query: k,
                            candidate: Some(id.0 as usize),
                            score,
                        },
                        None => DetectionRecord {
                            query: k,
                            candidate: None,
                            score: 0.0,
                        },
                    }
                })
                .collect();
            let curve = precision_recall(&records, interval);
            PrCurve {
                budget,
                recall_at_full_precision: recall_at_full_precision(&curve),
                curve,
                records,
            }
        })
        .collect()
}
