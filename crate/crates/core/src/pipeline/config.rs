use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::backend::{BaParams, PgoParams};
use crate::loop_closure::LoopParams;
use crate::sim::ScenarioConfig;

/// Everything a run needs besides the vocabulary. Every field has a default,
/// and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario file; when absent `scenario` is used.
    pub scenario_file: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub seed: u64,
    /// Corner budget per frame.
    pub features: usize,
    /// Frames between database keyframes in place-recognition experiments;
    /// also the index-difference bound for a true positive.
    pub keyframe_interval: usize,
    /// Side of the hybrid-selection grid cells (px).
    pub grid_cell: u32,
    /// Keyframes in the local map.
    pub local_window: usize,
    /// Keyframes skipped by detection after an accepted loop.
    pub loop_cooldown: usize,
    pub loop_closure: bool,
    pub global_ba: bool,
    /// Relative standard deviation of depth for newly created map points.
    pub depth_noise: f64,
    /// Vocabulary file; when absent one is trained on the scenario.
    pub vocabulary: Option<PathBuf>,
    pub vocab_k: u32,
    pub vocab_depth: u32,
    /// Keyframes sampled for vocabulary training.
    pub vocab_training_frames: usize,
    #[serde(rename = "loop")]
    pub loop_params: LoopParams,
    pub pose_graph: PgoParams,
    pub ba: BaParams,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario_file: None,
            scenario: ScenarioConfig::default(),
            seed: 0,
            features: 1600,
            keyframe_interval: 30,
            grid_cell: 30,
            local_window: 10,
            loop_cooldown: 10,
            loop_closure: true,
            global_ba: true,
            depth_noise: 0.01,
            vocabulary: None,
            vocab_k: 10,
            vocab_depth: 4,
            vocab_training_frames: 40,
            loop_params: LoopParams::default(),
            pose_graph: PgoParams::default(),
            ba: BaParams::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The scenario to simulate: the referenced file (relative paths
    /// resolved against `base`) or the inline one.
    pub fn resolve_scenario(&self, base: &Path) -> Result<ScenarioConfig, crate::sim::SimError> {
        match &self.scenario_file {
            Some(p) => ScenarioConfig::load(&base.join(p)),
            None => {
                self.scenario.validate()?;
                Ok(self.scenario.clone())
            }
        }
    }
}
