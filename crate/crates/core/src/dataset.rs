//! Labelled multi-band image datasets and stratified splits.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionConfig, BandPlan};
use crate::error::{config, domain, Result};
use crate::forward::{clutter_gain_for_ratio, simulate_bscan, slice_band, Aperture, BScan, NoiseSpec};
use crate::grid::ImagingGrid;
use crate::imaging::{bpa_image, BornInverter, BpaOptions, Image, ImageMeta, TruncationSpec};
use crate::num::Complex;
use crate::preproc::{project_out_positions, svd_clutter_reduce, ClutterReductionSpec};
use crate::scene::{rasterize_scene, MoistRegion, Pipe, Scene, SoilModel};

/// Ordered moisture levels (fractions of saturation) that class indices map to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoistureClassSet {
    pub levels: Vec<f64>,
}

impl Default for MoistureClassSet {
    /// Eight bags from 12.5 % to 100 % in 12.5 % steps.
    fn default() -> Self {
        Self::uniform(8, false)
    }
}

impl MoistureClassSet {
    /// `n` evenly spaced levels ending at 1; `with_dry` prepends a 0 % class.
    pub fn uniform(n: usize, with_dry: bool) -> Self {
        let mut levels: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        if with_dry {
            levels.insert(0, 0.0);
        }
        Self { levels }
    }

    /// Accepts 8 (default bags) or 9 (bags plus a dry class).
    pub fn with_count(count: usize) -> Result<Self> {
        match count {
            8 => Ok(Self::uniform(8, false)),
            9 => Ok(Self::uniform(8, true)),
            _ => Err(config(format!("class count must be 8 or 9, got {count}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < 2 {
            return Err(config("need at least two moisture classes"));
        }
        if self.levels.iter().any(|l| !(0.0..=1.0).contains(l)) || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config("moisture levels must be strictly increasing within [0, 1]"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, label: usize) -> Result<f64> {
        self.levels.get(label).copied().ok_or_else(|| domain(format!("class {label} out of range")))
    }
}

/// What each sample's image holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Magnitude of the uncorrected B-scan.
    Raw,
    /// Magnitude of the clutter-reduced B-scan.
    ClutterReduced,
    Bpa,
    Baa,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionScope {
    #[default]
    PerBand,
    /// Estimate the clutter subspace once on the wideband scan and remove it from every band.
    WidebandFirst,
}

/// Geometry of the laboratory-style scenes: a water pipe beside a small pocket of moist soil.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub soil: SoilModel,
    pub pipe_depth_m: f64,
    pub pipe_diameter_m: f64,
    pub pipe_water_filled: bool,
    /// Horizontal offset of the moist region from the pipe, which sits mid-scan.
    pub moist_offset_x_m: f64,
    pub moist_depth_m: f64,
    pub moist_radius_m: f64,
}

impl Default for SceneTemplate {
    fn default() -> Self {
        Self {
            soil: SoilModel::default(),
            pipe_depth_m: 0.12,
            pipe_diameter_m: 0.045,
            pipe_water_filled: true,
            moist_offset_x_m: 0.25,
            moist_depth_m: 0.12,
            moist_radius_m: 0.01,
        }
    }
}

impl SceneTemplate {
    /// Scene centred on the scan line with the moist region at `sm_fraction`.
    pub fn scene(&self, cfg: &AcquisitionConfig, sm_fraction: f64, rng_seed: u64) -> Scene {
        let x = cfg.scan_length_m / 2.0;
        Scene {
            soil: self.soil,
            pipe: Some(Pipe { x_m: x, depth_m: self.pipe_depth_m, diameter_m: self.pipe_diameter_m, water_filled: self.pipe_water_filled }),
            moist_region: Some(MoistRegion { center_x_m: x + self.moist_offset_x_m, center_z_m: self.moist_depth_m, radius_m: self.moist_radius_m, sm_fraction }),
            clutter_points: Vec::new(),
            rng_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stage: Stage,
    pub n_remove: usize,
    #[serde(default)]
    pub reduction_scope: ReductionScope,
    pub truncation: TruncationSpec,
    /// Back-projection grid (also the simulation grid).
    pub image_nx: usize,
    pub image_nz: usize,
    pub image_depth_m: f64,
    /// Coarser grid for the Born inversion, whose operator is dense.
    pub baa_nx: usize,
    pub baa_nz: usize,
    /// Side of the square classifier input.
    pub classifier_side: usize,
    pub spreading_compensation: bool,
    /// Scattered-signal to noise ratio; `None` for noiseless data.
    pub snr_db: Option<f64>,
    /// Direct-coupling clutter level above the scattered signal.
    pub clutter_to_signal_db: f64,
    /// Scan-to-scan relative drift of the clutter gain, drawn uniformly in `[-j, +j]`.
    pub clutter_gain_jitter: f64,
    pub scene: SceneTemplate,
    pub scenario_id: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stage: Stage::Bpa,
            n_remove: 1,
            reduction_scope: ReductionScope::PerBand,
            truncation: TruncationSpec::default(),
            image_nx: 96,
            image_nz: 96,
            image_depth_m: 0.4,
            baa_nx: 24,
            baa_nz: 12,
            classifier_side: 48,
            spreading_compensation: false,
            snr_db: Some(10.0),
            clutter_to_signal_db: 20.0,
            clutter_gain_jitter: 0.3,
            scene: SceneTemplate::default(),
            scenario_id: "reference".into(),
        }
    }
}

impl PipelineConfig {
    pub fn with_stage(stage: Stage) -> Self {
        Self { stage, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.truncation.validate()?;
        if self.classifier_side == 0 || !self.classifier_side.is_multiple_of(4) {
            return Err(config("classifier_side must be a positive multiple of 4"));
        }
        if !(self.image_depth_m > 0.0) {
            return Err(config("image_depth_m must be positive"));
        }
        if !(0.0..1.0).contains(&self.clutter_gain_jitter) {
            return Err(config("clutter_gain_jitter must lie in [0, 1)"));
        }
        self.scene.soil.validate()
    }
}

/// SplitMix64 finalizer used to derive independent seeds from a base seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Turns scenes into one classifier-ready image per band.
#[derive(Clone, Debug)]
pub struct BandImager {
    pub acquisition: AcquisitionConfig,
    pub plan: BandPlan,
    pub pipeline: PipelineConfig,
    pub grid: ImagingGrid,
    /// Clutter gain before per-scan drift; fixed by the reference scene.
    pub clutter_gain: f64,
    inverters: Vec<BornInverter<f64>>,
}

impl BandImager {
    pub fn new(acquisition: &AcquisitionConfig, plan: &BandPlan, pipeline: &PipelineConfig, reference_level: f64) -> Result<Self> {
        acquisition.validate()?;
        pipeline.validate()?;
        let grid = ImagingGrid::under_scan(acquisition.scan_length_m, pipeline.image_depth_m, pipeline.image_nx, pipeline.image_nz)?;
        let first = plan.bands.first().ok_or_else(|| config("band plan is empty"))?;
        let reference = pipeline.scene.scene(acquisition, reference_level, 0);
        let contrast = rasterize_scene::<f64>(&reference, &grid)?;
        let clean = slice_band(&contrast, first, acquisition, &NoiseSpec::noiseless())?;
        let clutter_gain = clutter_gain_for_ratio(clean.rms(), clean.n_freq(), pipeline.clutter_to_signal_db);

        let mut inverters = Vec::new();
        if pipeline.stage == Stage::Baa {
            let baa_grid = ImagingGrid::under_scan(acquisition.scan_length_m, pipeline.image_depth_m, pipeline.baa_nx, pipeline.baa_nz)?;
            let eps_bg = pipeline.scene.soil.background_permittivity();
            for band in &plan.bands {
                let aperture = Aperture::from_config(&band.config(acquisition))?;
                inverters.push(BornInverter::new(baa_grid, aperture, eps_bg)?);
            }
        }
        Ok(Self { acquisition: *acquisition, plan: plan.clone(), pipeline: pipeline.clone(), grid, clutter_gain, inverters })
    }

    fn noise_for(&self, scan_seed: u64, band_index: usize) -> NoiseSpec {
        let seed = mix_seed(scan_seed, band_index as u64 + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC1u64);
        let j = self.pipeline.clutter_gain_jitter;
        let drift = if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
        NoiseSpec { snr_db: self.pipeline.snr_db, clutter_gain: self.clutter_gain * (1.0 + drift), rng_seed: seed }
    }

    fn magnitude_image(bscan: &BScan<f64>) -> Result<Image<f64>> {
        // Position along x, frequency (GHz) along the second axis.
        let (x0, x1) = (bscan.pos_m[0], *bscan.pos_m.last().unwrap());
        let (f0, f1) = (bscan.freq_hz[0] * 1e-9, *bscan.freq_hz.last().unwrap() * 1e-9);
        let grid = ImagingGrid::new(x0, x1.max(x0 + 1e-9), f0, f1.max(f0 + 1e-9), bscan.n_pos(), bscan.n_freq())?;
        Image::from_matrix(grid, &bscan.magnitude())
    }

    fn reduce(&self, bscan: &BScan<f64>, wideband: Option<&BScan<f64>>) -> Result<BScan<f64>> {
        match (self.pipeline.reduction_scope, wideband) {
            (ReductionScope::WidebandFirst, Some(w)) => project_out_positions(bscan, w, self.pipeline.n_remove),
            _ => svd_clutter_reduce(bscan, &ClutterReductionSpec { n_remove: self.pipeline.n_remove }),
        }
    }

    fn process(&self, bscan: &BScan<f64>, wideband: Option<&BScan<f64>>, band_pos: usize) -> Result<Image<f64>> {
        let p = &self.pipeline;
        let image = match p.stage {
            Stage::Raw => Self::magnitude_image(bscan)?,
            Stage::ClutterReduced => Self::magnitude_image(&self.reduce(bscan, wideband)?)?,
            Stage::Bpa => {
                let opts = BpaOptions {
                    eps_bg: p.scene.soil.background_permittivity(),
                    antenna_height_m: self.acquisition.antenna_height_m,
                    spreading_compensation: p.spreading_compensation,
                };
                bpa_image(&self.reduce(bscan, wideband)?, &self.grid, &opts)?
            }
            Stage::Baa => self.inverters[band_pos].image(&self.reduce(bscan, wideband)?, &p.truncation)?,
        };
        Ok(image.resample(p.classifier_side, p.classifier_side)?.normalized())
    }

    /// One image per band of the plan for `scene`; noise and clutter drift derive from `scan_seed`.
    pub fn images_for_scene(&self, scene: &Scene, scan_seed: u64) -> Result<Vec<Image<f64>>> {
        let contrast = rasterize_scene::<f64>(scene, &self.grid)?;
        let wideband = if self.pipeline.reduction_scope == ReductionScope::WidebandFirst && self.pipeline.stage != Stage::Raw {
            Some(simulate_bscan(&contrast, &self.acquisition, &self.noise_for(scan_seed, usize::MAX - 1))?)
        } else {
            None
        };
        let pipeline_json = serde_json::json!({
            "stage": self.pipeline.stage,
            "n_remove": self.pipeline.n_remove,
            "scenario_id": self.pipeline.scenario_id,
        });
        let mut out = Vec::with_capacity(self.plan.bands.len());
        for (pos, band) in self.plan.bands.iter().enumerate() {
            let bscan = slice_band(&contrast, band, &self.acquisition, &self.noise_for(scan_seed, band.index))?;
            let image = self.process(&bscan, wideband.as_ref(), pos)?;
            out.push(image.with_meta(ImageMeta { source_band: Some(band.index), pipeline: pipeline_json.clone() }));
        }
        Ok(out)
    }

    pub fn eps_bg(&self) -> Complex<f64> {
        self.pipeline.scene.soil.background_permittivity()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub id: usize,
    pub image: Image<f64>,
    pub label: usize,
    pub band_index: usize,
    pub scenario_id: String,
    pub scene_seed: u64,
}

/// Everything needed to regenerate a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub classes: MoistureClassSet,
    pub acquisition: AcquisitionConfig,
    pub band_plan: BandPlan,
    pub pipeline: PipelineConfig,
    pub seed: u64,
}

/// Builds a scene per class level, images it in every band, and labels the results.
pub fn generate_dataset(
    classes: &MoistureClassSet,
    acquisition: &AcquisitionConfig,
    band_plan: &BandPlan,
    pipeline: &PipelineConfig,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    classes.validate()?;
    let mid = classes.levels[classes.len() / 2];
    let imager = BandImager::new(acquisition, band_plan, pipeline, mid)?;
    generate_with(&imager, classes, seed)
}

pub fn generate_with(imager: &BandImager, classes: &MoistureClassSet, seed: u64) -> Result<Vec<LabeledSample>> {
    classes.validate()?;
    let mut samples = Vec::with_capacity(classes.len() * imager.plan.bands.len());
    for (label, &level) in classes.levels.iter().enumerate() {
        let scene_seed = mix_seed(seed, label as u64);
        let scene = imager.pipeline.scene.scene(&imager.acquisition, level, scene_seed);
        let images = imager.images_for_scene(&scene, scene_seed)?;
        for (image, band) in images.into_iter().zip(&imager.plan.bands) {
            samples.push(LabeledSample {
                id: samples.len(),
                image,
                label,
                band_index: band.index,
                scenario_id: imager.pipeline.scenario_id.clone(),
                scene_seed,
            });
        }
    }
    Ok(samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratified: bool,
}

/// Largest-remainder apportionment of `n` items to `ratios`.
fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts = [0usize; 3];
    for s in 0..3 {
        counts[s] = exact[s].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &s in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[s] > 0.0 {
            counts[s] += 1;
            left -= 1;
        }
    }
    counts
}

/// Stratified (per-class) or plain shuffled split into train/validation/test.
pub fn split_dataset(samples: &[LabeledSample], ratios: [f64; 3], seed: u64, stratified: bool) -> Result<SplitManifest> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 || ratios[0] <= 0.0 {
        return Err(config(format!("split ratios {ratios:?} must be nonnegative, sum to 1 and give training data")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    if !stratified {
        let mut ids: Vec<usize> = samples.iter().map(|s| s.id).collect();
        ids.shuffle(&mut rng);
        let counts = apportion(ids.len(), &ratios);
        let mut it = ids.into_iter();
        for s in 0..3 {
            parts[s].extend(it.by_ref().take(counts[s]));
        }
    } else {
        let n_classes = samples.iter().map(|s| s.label + 1).max().unwrap_or(0);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for s in samples {
            by_class[s.label].push(s.id);
        }
        let n_parts = ratios.iter().filter(|r| **r > 0.0).count();
        let targets = apportion(samples.len(), &ratios);
        let mut assigned = [0usize; 3];
        let mut plans = Vec::with_capacity(n_classes);
        for ids in &by_class {
            if ids.is_empty() {
                plans.push([0; 3]);
                continue;
            }
            if ids.len() < n_parts {
                return Err(config(format!("a class has {} samples, fewer than the {n_parts} split parts", ids.len())));
            }
            let n = ids.len();
            let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
            let mut counts = [0usize; 3];
            for s in 0..3 {
                counts[s] = exact[s].floor() as usize;
                assigned[s] += counts[s];
            }
            plans.push(counts);
        }
        // Hand out each class's leftovers to the splits furthest below their global target.
        for (c, ids) in by_class.iter().enumerate() {
            let n = ids.len();
            let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
            let mut used = [false; 3];
            while plans[c].iter().sum::<usize>() < n {
                let s = (0..3)
                    .filter(|&s| !used[s] && ratios[s] > 0.0)
                    .max_by(|&a, &b| {
                        let da = targets[a] as i64 - assigned[a] as i64;
                        let db = targets[b] as i64 - assigned[b] as i64;
                        da.cmp(&db)
                            .then((exact[a] - exact[a].floor()).total_cmp(&(exact[b] - exact[b].floor())))
                            .then(b.cmp(&a))
                    })
                    .expect("fewer leftovers than splits");
                used[s] = true;
                plans[c][s] += 1;
                assigned[s] += 1;
            }
        }
        for (c, ids) in by_class.iter().enumerate() {
            let mut ids = ids.clone();
            ids.shuffle(&mut rng);
            let mut it = ids.into_iter();
            for s in 0..3 {
                parts[s].extend(it.by_ref().take(plans[c][s]));
            }
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok(SplitManifest { train, val, test, ratios, seed, stratified })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub file: String,
    pub label: usize,
    pub level: f64,
    pub band_index: usize,
    pub scenario_id: String,
    pub scene_seed: u64,
}

/// `manifest.json`: the single source of truth for a dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: DatasetSpec,
    pub samples: Vec<SampleRecord>,
    pub split: SplitManifest,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes one MWIM file per sample plus the manifest; paths in the manifest are relative.
pub fn write_dataset(dir: impl AsRef<Path>, spec: &DatasetSpec, samples: &[LabeledSample], split: &SplitManifest) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("samples"))?;
    let mut records = Vec::with_capacity(samples.len());
    for s in samples {
        let file = format!("samples/sample_{:04}.mwim", s.id);
        s.image.write(dir.join(&file))?;
        records.push(SampleRecord {
            id: s.id,
            file,
            label: s.label,
            level: spec.classes.level(s.label)?,
            band_index: s.band_index,
            scenario_id: s.scenario_id.clone(),
            scene_seed: s.scene_seed,
        });
    }
    let manifest = DatasetManifest { spec: spec.clone(), samples: records, split: split.clone() };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<LabeledSample>)> {
    let dir = dir.as_ref();
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let samples = manifest
        .samples
        .iter()
        .map(|r| {
            Ok(LabeledSample {
                id: r.id,
                image: Image::read(dir.join(&r.file))?,
                label: r.label,
                band_index: r.band_index,
                scenario_id: r.scenario_id.clone(),
                scene_seed: r.scene_seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_samples(per_class: usize, classes: usize) -> Vec<LabeledSample> {
        let g = ImagingGrid::new(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        (0..per_class * classes)
            .map(|id| LabeledSample { id, image: Image::zeros(g), label: id / per_class, band_index: id % per_class, scenario_id: "t".into(), scene_seed: 0 })
            .collect()
    }

    #[test]
    fn default_classes() {
        let c = MoistureClassSet::default();
        assert_eq!(c.levels, vec![0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0]);
        assert_eq!(MoistureClassSet::with_count(9).unwrap().levels[0], 0.0);
        assert!(MoistureClassSet::with_count(7).is_err());
        assert!(MoistureClassSet { levels: vec![0.5, 0.25] }.validate().is_err());
    }

    #[test]
    fn reference_split_sizes() {
        let samples = fake_samples(16, 8);
        let split = split_dataset(&samples, [0.6, 0.2, 0.2], 3, true).unwrap();
        let sizes = (split.train.len() as i64, split.val.len() as i64, split.test.len() as i64);
        assert!((sizes.0 - 77).abs() <= 2 && (sizes.1 - 26).abs() <= 2 && (sizes.2 - 25).abs() <= 2, "{sizes:?}");
        for c in 0..8 {
            for (part, ratio) in [(&split.train, 0.6), (&split.val, 0.2), (&split.test, 0.2)] {
                let n = part.iter().filter(|&&id| samples[id].label == c).count() as f64;
                assert!((n - 16.0 * ratio).abs() <= 1.0);
            }
        }
        let mut all: Vec<usize> = [split.train.clone(), split.val.clone(), split.test.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..128).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_ratios_and_small_classes() {
        let samples = fake_samples(4, 3);
        let all_train = split_dataset(&samples, [1.0, 0.0, 0.0], 1, true).unwrap();
        assert_eq!(all_train.train.len(), 12);
        assert!(all_train.val.is_empty() && all_train.test.is_empty());
        let tiny = fake_samples(2, 2);
        assert!(matches!(split_dataset(&tiny, [0.6, 0.2, 0.2], 1, true), Err(crate::Error::Config(_))));
        assert!(split_dataset(&samples, [0.5, 0.2, 0.2], 1, true).is_err());
    }

    #[test]
    fn seeds_permute_but_keep_counts() {
        let samples = fake_samples(16, 8);
        let a = split_dataset(&samples, [0.6, 0.2, 0.2], 1, true).unwrap();
        let b = split_dataset(&samples, [0.6, 0.2, 0.2], 2, true).unwrap();
        assert_ne!(a.train, b.train);
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (b.train.len(), b.val.len(), b.test.len()));
        assert_eq!(a, split_dataset(&samples, [0.6, 0.2, 0.2], 1, true).unwrap());
    }

    #[test]
    fn mix_seed_spreads() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
    }
}
