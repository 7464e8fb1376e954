use serde::{Deserialize, Serialize};

use super::scenario::{prepare_scenario, train_learner, ImagingMethod, Learner, PreparedScenario, ScenarioOptions, ScenarioSpec};
use crate::dataset::{mix_seed, BandImager, MoistureClassSet};
use crate::error::{domain, Result};
use crate::learn::{predict_sm, TrainedModel};
use crate::scene::{add_medium_clutter, ClutterDensity, ClutterKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub sm_truth: f64,
    pub kind: ClutterKind,
    pub density: ClutterDensity,
    pub predicted_sm: f64,
    /// Prediction for the same scene without medium clutter.
    pub clean_predicted_sm: f64,
}

/// A classifier trained on clutter-free data together with the imaging chain that fed it.
#[derive(Clone, Debug)]
pub struct RobustnessBench {
    pub imager: BandImager,
    pub classes: MoistureClassSet,
    pub model: TrainedModel<f64>,
    pub seed: u64,
}

impl RobustnessBench {
    /// Trains on the reference scenario with `opts`; the class set should contain the levels to be tested.
    pub fn train(opts: &ScenarioOptions, learner: Learner, imaging: ImagingMethod, seed: u64) -> Result<Self> {
        let spec = ScenarioSpec::by_id("reference")?;
        let prepared = prepare_scenario(opts, &spec, imaging, seed)?;
        Self::from_prepared(&prepared, opts, learner, seed)
    }

    /// Trains `learner` on an already generated clutter-free dataset.
    pub fn from_prepared(prepared: &PreparedScenario, opts: &ScenarioOptions, learner: Learner, seed: u64) -> Result<Self> {
        let d = &prepared.dataset;
        let (model, _) = train_learner(learner, &prepared.samples, &prepared.split, d.classes.len(), opts, seed)?;
        let mid = d.classes.levels[d.classes.len() / 2];
        let imager = BandImager::new(&d.acquisition, &d.band_plan, &d.pipeline, mid)?;
        Ok(Self { imager, classes: d.classes.clone(), model, seed })
    }

    fn predict_scene(&self, scene: &crate::scene::Scene, scan_seed: u64) -> Result<f64> {
        let images = self.imager.images_for_scene(scene, scan_seed)?;
        predict_sm(&self.model, &images, &self.classes, self.imager.plan.bands.len())
    }

    /// Predicted moisture for a scene at `sm_truth` with added pebbles or roots.
    pub fn evaluate(&self, sm_truth: f64, kind: ClutterKind, density: ClutterDensity, clutter_seed: u64) -> Result<RobustnessReport> {
        if !(0.0..=1.0).contains(&sm_truth) {
            return Err(domain(format!("sm_truth {sm_truth} outside [0, 1]")));
        }
        let scan_seed = mix_seed(self.seed, 0x5EED);
        let clean = self.imager.pipeline.scene.scene(&self.imager.acquisition, sm_truth, scan_seed);
        let cluttered = add_medium_clutter(&clean, &self.imager.grid, kind, density, clutter_seed);
        let clean_predicted_sm = self.predict_scene(&clean, scan_seed)?;
        let predicted_sm = if cluttered == clean { clean_predicted_sm } else { self.predict_scene(&cluttered, scan_seed)? };
        Ok(RobustnessReport { sm_truth, kind, density, predicted_sm, clean_predicted_sm })
    }
}

/// Trains on the nine-class set (dry soil included) and evaluates one cluttered scene.
pub fn run_clutter_robustness(
    sm_truth: f64,
    kind: ClutterKind,
    density: ClutterDensity,
    learner: Learner,
    imaging: ImagingMethod,
    seed: u64,
) -> Result<RobustnessReport> {
    let opts = ScenarioOptions { classes: MoistureClassSet::uniform(8, true), ..ScenarioOptions::default() };
    RobustnessBench::train(&opts, learner, imaging, seed)?.evaluate(sm_truth, kind, density, mix_seed(seed, 7))
}
