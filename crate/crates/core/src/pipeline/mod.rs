//! End-to-end runs on simulated scenarios.

mod config;
mod experiments;
mod output;
mod frontend;
mod run;

pub use config::RunConfig;
pub use output::write_run_outputs;
pub use experiments::{revisit_pose, run_pr_experiment, PrCurve, PrExperimentConfig};
pub use frontend::{extract, FrameFeatures, Frontend};
pub use run::{
    correct_loop, run_pipeline, train_scenario_vocabulary, LoopEvent, RunOutput, RunSummary, SharedMap, StageTimes,
};
