use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{confusion_and_accuracy, ConfusionMatrix};
use crate::acquisition::{make_band_plan, AcquisitionConfig, BandPlan};
use crate::dataset::{generate_dataset, mix_seed, split_dataset, DatasetSpec, LabeledSample, MoistureClassSet, PipelineConfig, SplitManifest, Stage};
use crate::error::{config, Result};
use crate::learn::{cnn_train, Classifier, CnnArchitecture, CnnModel, Example, FeatureVector, KnnConfig, KnnModel, TrainConfig, TrainHistory, TrainedModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Cnn,
    Knn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagingMethod {
    Bpa,
    Baa,
}

impl ImagingMethod {
    pub fn stage(self) -> Stage {
        match self {
            ImagingMethod::Bpa => Stage::Bpa,
            ImagingMethod::Baa => Stage::Baa,
        }
    }
}

/// Which processing a scenario's samples go through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioStage {
    Raw,
    ClutterReduced,
    /// Clutter reduction then the imaging method chosen at run time.
    Imaged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "count")]
pub enum BandSubset {
    All,
    Lower(usize),
    Upper(usize),
}

/// One row of the scenario table: a pipeline stage plus acquisition overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub stage: ScenarioStage,
    pub n_remove: usize,
    pub bands: BandSubset,
    pub f_step_hz: Option<u64>,
    pub n_positions: Option<usize>,
    pub scan_length_m: Option<f64>,
    pub band_spacing_hz: Option<u64>,
}

impl ScenarioSpec {
    fn base(id: &str) -> Self {
        Self {
            id: id.into(),
            stage: ScenarioStage::Imaged,
            n_remove: 1,
            bands: BandSubset::All,
            f_step_hz: None,
            n_positions: None,
            scan_length_m: None,
            band_spacing_hz: None,
        }
    }

    /// The nine scenarios, in table order.
    pub fn table() -> Vec<Self> {
        vec![
            Self { stage: ScenarioStage::Raw, ..Self::base("raw") },
            Self { stage: ScenarioStage::ClutterReduced, ..Self::base("clutter_reduced") },
            Self::base("reference"),
            Self { bands: BandSubset::Lower(8), ..Self::base("lower8") },
            Self { bands: BandSubset::Upper(8), ..Self::base("upper8") },
            Self { f_step_hz: Some(75_000_000), ..Self::base("df75") },
            Self { n_positions: Some(23), ..Self::base("ns23") },
            Self { scan_length_m: Some(0.6), ..Self::base("l06") },
            Self { band_spacing_hz: Some(50_000_000), ..Self::base("bandspacing50") },
        ]
    }

    pub fn ids() -> Vec<String> {
        Self::table().into_iter().map(|s| s.id).collect()
    }

    pub fn by_id(id: &str) -> Result<Self> {
        Self::table()
            .into_iter()
            .find(|s| s.id == id)
            .ok_or_else(|| config(format!("unknown scenario {id:?}; known: {}", Self::ids().join(", "))))
    }

    pub fn acquisition(&self, base: &AcquisitionConfig) -> Result<AcquisitionConfig> {
        let mut cfg = *base;
        if let Some(n) = self.n_positions {
            cfg.n_positions = n;
        }
        if let Some(l) = self.scan_length_m {
            cfg.scan_length_m = l;
        }
        if let Some(step) = self.f_step_hz {
            cfg = cfg.with_step_snapped(step)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn band_plan(&self, cfg: &AcquisitionConfig, n_bands: usize, band_spacing_hz: u64) -> Result<BandPlan> {
        let plan = make_band_plan(cfg, n_bands, self.band_spacing_hz.unwrap_or(band_spacing_hz))?;
        match self.bands {
            BandSubset::All => Ok(plan),
            BandSubset::Lower(n) if n <= n_bands => plan.subset(0..n),
            BandSubset::Upper(n) if n <= n_bands => plan.subset(n_bands - n..n_bands),
            _ => Err(config(format!("band subset {:?} exceeds {n_bands} bands", self.bands))),
        }
    }

    pub fn pipeline(&self, base: &PipelineConfig, imaging: ImagingMethod) -> PipelineConfig {
        let stage = match self.stage {
            ScenarioStage::Raw => Stage::Raw,
            ScenarioStage::ClutterReduced => Stage::ClutterReduced,
            ScenarioStage::Imaged => imaging.stage(),
        };
        PipelineConfig { stage, n_remove: self.n_remove, scenario_id: self.id.clone(), ..base.clone() }
    }
}

/// Settings shared by every scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOptions {
    pub acquisition: AcquisitionConfig,
    pub n_bands: usize,
    pub band_spacing_hz: u64,
    pub classes: MoistureClassSet,
    pub pipeline: PipelineConfig,
    pub split_ratios: [f64; 3],
    pub knn: KnnConfig,
    pub train: TrainConfig,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::reference(),
            n_bands: 16,
            band_spacing_hz: 10_000_000,
            classes: MoistureClassSet::default(),
            pipeline: PipelineConfig::default(),
            split_ratios: [0.6, 0.2, 0.2],
            knn: KnnConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// A generated dataset and its split, ready for training.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub dataset: DatasetSpec,
    pub samples: Vec<LabeledSample>,
    pub split: SplitManifest,
}

pub fn prepare_scenario(opts: &ScenarioOptions, spec: &ScenarioSpec, imaging: ImagingMethod, seed: u64) -> Result<PreparedScenario> {
    let acquisition = spec.acquisition(&opts.acquisition)?;
    let band_plan = spec.band_plan(&acquisition, opts.n_bands, opts.band_spacing_hz)?;
    let pipeline = spec.pipeline(&opts.pipeline, imaging);
    let samples = generate_dataset(&opts.classes, &acquisition, &band_plan, &pipeline, seed)?;
    let split = split_dataset(&samples, opts.split_ratios, mix_seed(seed, 1), true)?;
    let dataset = DatasetSpec { classes: opts.classes.clone(), acquisition, band_plan, pipeline, seed };
    Ok(PreparedScenario { dataset, samples, split })
}

fn examples(samples: &[LabeledSample], ids: &[usize]) -> Vec<Example<f64>> {
    ids.iter().map(|&i| Example::new(FeatureVector::from_image(&samples[i].image), samples[i].label)).collect()
}

/// Fits KNN on the training split, or trains the CNN with the validation split for early stopping.
pub fn train_learner(
    learner: Learner,
    samples: &[LabeledSample],
    split: &SplitManifest,
    n_classes: usize,
    opts: &ScenarioOptions,
    seed: u64,
) -> Result<(TrainedModel<f64>, Option<TrainHistory>)> {
    let train = examples(samples, &split.train);
    match learner {
        Learner::Knn => {
            let (features, labels) = train.into_iter().map(|e| (e.input, e.label)).unzip();
            Ok((TrainedModel::Knn(KnnModel::fit(features, labels, opts.knn.k)?), None))
        }
        Learner::Cnn => {
            let val = examples(samples, &split.val);
            let side = samples.first().map_or(opts.pipeline.classifier_side, |s| s.image.grid.nx);
            let model = CnnModel::new(CnnArchitecture::new(side, n_classes), mix_seed(seed, 2))?;
            let cfg = TrainConfig { seed: mix_seed(seed, 3), ..opts.train };
            let (model, history) = cnn_train(&model, &train, &val, &cfg)?;
            Ok((TrainedModel::Cnn(model), Some(history)))
        }
    }
}

pub fn evaluate_model<C: Classifier<f64> + ?Sized>(
    model: &C,
    samples: &[LabeledSample],
    ids: &[usize],
    n_classes: usize,
) -> Result<(ConfusionMatrix, f64)> {
    let mut preds = Vec::with_capacity(ids.len());
    let mut labels = Vec::with_capacity(ids.len());
    for &i in ids {
        preds.push(model.classify_image(&samples[i].image)?);
        labels.push(samples[i].label);
    }
    confusion_and_accuracy(&preds, &labels, n_classes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: ScenarioSpec,
    pub learner: Learner,
    pub imaging: ImagingMethod,
    pub seed: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub dataset: DatasetSpec,
    pub history: Option<TrainHistory>,
}

impl ScenarioReport {
    /// Aligned text table, one row per report.
    pub fn table(reports: &[ScenarioReport]) -> String {
        let mut out = format!("{:<16} {:<6} {:<8} {:>6} {:>6} {:>9}\n", "scenario", "model", "imaging", "seed", "test", "accuracy");
        for r in reports {
            let learner = match r.learner {
                Learner::Cnn => "cnn",
                Learner::Knn => "knn",
            };
            let imaging = match r.imaging {
                ImagingMethod::Bpa => "bpa",
                ImagingMethod::Baa => "baa",
            };
            let _ = writeln!(out, "{:<16} {:<6} {:<8} {:>6} {:>6} {:>8.1}%", r.scenario.id, learner, imaging, r.seed, r.n_test, 100.0 * r.accuracy);
        }
        out
    }
}

/// Regenerates the scenario's dataset, trains the learner and scores it on the test split.
pub fn run_scenario(spec: &ScenarioSpec, learner: Learner, imaging: ImagingMethod, seed: u64) -> Result<ScenarioReport> {
    run_scenario_with(&ScenarioOptions::default(), spec, learner, imaging, seed)
}

pub fn run_scenario_with(
    opts: &ScenarioOptions,
    spec: &ScenarioSpec,
    learner: Learner,
    imaging: ImagingMethod,
    seed: u64,
) -> Result<ScenarioReport> {
    let prepared = prepare_scenario(opts, spec, imaging, seed)?;
    report_for(opts, &prepared, spec, learner, imaging, seed)
}

/// Trains and scores one learner on an already generated scenario.
pub fn report_for(
    opts: &ScenarioOptions,
    prepared: &PreparedScenario,
    spec: &ScenarioSpec,
    learner: Learner,
    imaging: ImagingMethod,
    seed: u64,
) -> Result<ScenarioReport> {
    let n_classes = prepared.dataset.classes.len();
    let (model, history) = train_learner(learner, &prepared.samples, &prepared.split, n_classes, opts, seed)?;
    let (confusion, accuracy) = evaluate_model(&model, &prepared.samples, &prepared.split.test, n_classes)?;
    Ok(ScenarioReport {
        scenario: spec.clone(),
        learner,
        imaging,
        seed,
        accuracy,
        confusion,
        n_train: prepared.split.train.len(),
        n_val: prepared.split.val.len(),
        n_test: prepared.split.test.len(),
        dataset: prepared.dataset.clone(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_nine_distinct_ids() {
        let ids = ScenarioSpec::ids();
        assert_eq!(ids.len(), 9);
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 9);
        assert!(ScenarioSpec::by_id("nope").is_err());
    }

    #[test]
    fn overrides_resolve_to_valid_acquisitions() {
        let opts = ScenarioOptions::default();
        for spec in ScenarioSpec::table() {
            let cfg = spec.acquisition(&opts.acquisition).unwrap();
            let plan = spec.band_plan(&cfg, opts.n_bands, opts.band_spacing_hz).unwrap();
            for band in &plan.bands {
                band.config(&cfg).validate().unwrap();
            }
            let expected_bands = if matches!(spec.bands, BandSubset::All) { 16 } else { 8 };
            assert_eq!(plan.bands.len(), expected_bands, "{}", spec.id);
        }
        let df = ScenarioSpec::by_id("df75").unwrap().acquisition(&opts.acquisition).unwrap();
        assert_eq!((df.f_max_hz, df.n_frequencies().unwrap()), (3_750_000_000, 35));
        let upper = ScenarioSpec::by_id("upper8").unwrap();
        let plan = upper.band_plan(&opts.acquisition, 16, 10_000_000).unwrap();
        assert_eq!(plan.bands[0].index, 8);
        let spaced = ScenarioSpec::by_id("bandspacing50").unwrap().band_plan(&opts.acquisition, 16, 10_000_000).unwrap();
        assert_eq!(spaced.bandwidth_hz(), 1_825_000_000);
    }

    #[test]
    fn stage_mapping() {
        let base = PipelineConfig::default();
        assert_eq!(ScenarioSpec::by_id("raw").unwrap().pipeline(&base, ImagingMethod::Baa).stage, Stage::Raw);
        assert_eq!(ScenarioSpec::by_id("reference").unwrap().pipeline(&base, ImagingMethod::Baa).stage, Stage::Baa);
        assert_eq!(ScenarioSpec::by_id("l06").unwrap().pipeline(&base, ImagingMethod::Bpa).scenario_id, "l06");
    }
}
