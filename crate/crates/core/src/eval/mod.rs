//! Metrics, scenario runs, clutter robustness and leak tracking.

mod metrics;
mod robustness;
mod scenario;
mod track;

pub use metrics::{confusion_and_accuracy, ConfusionMatrix};
pub use robustness::{run_clutter_robustness, RobustnessBench, RobustnessReport};
pub use scenario::{
    evaluate_model, prepare_scenario, report_for, run_scenario, run_scenario_with, train_learner, BandSubset, ImagingMethod, Learner,
    PreparedScenario, ScenarioOptions, ScenarioReport, ScenarioSpec, ScenarioStage,
};
pub use track::{ols_fit, track_leak, LeakScenario, LeakTrack, LinearFit};
