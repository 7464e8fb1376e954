//! `pipescan`: simulate, process, image, learn and evaluate subsurface moisture scans.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use pipescan_core::acquisition::AcquisitionConfig;
use pipescan_core::dataset::{read_dataset, write_dataset, BandImager, MoistureClassSet};
use pipescan_core::eval::{
    evaluate_model, prepare_scenario, report_for, run_clutter_robustness, track_leak, train_learner, ImagingMethod, LeakScenario, Learner,
    ScenarioOptions, ScenarioReport, ScenarioSpec,
};
use pipescan_core::forward::{simulate_bscan, NoiseSpec};
use pipescan_core::grid::ImagingGrid;
use pipescan_core::imaging::{baa_image, bpa_image, BpaOptions, ImageMeta, TruncationSpec};
use pipescan_core::learn::{CnnModel, KnnModel, TrainedModel};
use pipescan_core::preproc::{svd_clutter_reduce, ClutterReductionSpec};
use pipescan_core::scene::{rasterize_scene, ClutterDensity, ClutterKind, Scene, SoilModel};
use pipescan_core::{BScan64, Error};

#[derive(Parser, Debug)]
#[command(name = "pipescan", version, about = "Soil-moisture estimation from simulated SFCW radar scans")]
struct Cli {
    /// Base seed for every random choice.
    #[arg(long, env = "PIPESCAN_SEED", default_value_t = 0, global = true)]
    seed: u64,
    /// Directory for outputs and the run.json provenance record.
    #[arg(long, default_value = "out", global = true)]
    out_dir: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a B-scan of a scene (MWBS).
    Simulate(SimulateArgs),
    /// Remove leading singular components from a B-scan.
    Reduce(ReduceArgs),
    /// Form an image (MWIM) from a B-scan.
    Image(ImageArgs),
    /// Generate a labelled dataset directory.
    Dataset(DatasetArgs),
    /// Train a classifier on a dataset directory.
    Train(TrainArgs),
    /// Run one or all table scenarios and report test accuracy.
    Eval(EvalArgs),
    /// Estimate moisture over a synthetic leak time series.
    Track(TrackArgs),
    /// Predict moisture for a cluttered scene with a model trained on clean data.
    Robustness(RobustnessArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum LearnerArg {
    Cnn,
    Knn,
}

impl From<LearnerArg> for Learner {
    fn from(l: LearnerArg) -> Self {
        match l {
            LearnerArg::Cnn => Learner::Cnn,
            LearnerArg::Knn => Learner::Knn,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    Bpa,
    Baa,
}

impl From<MethodArg> for ImagingMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bpa => ImagingMethod::Bpa,
            MethodArg::Baa => ImagingMethod::Baa,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum KindArg {
    Pebble,
    Root,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DensityArg {
    None,
    Low,
    Moderate,
    High,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Scene JSON.
    #[arg(long)]
    scene: PathBuf,
    /// Acquisition JSON; the reference acquisition when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal-to-noise ratio in dB; noiseless when omitted.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    clutter_gain: f64,
    #[arg(long, default_value_t = 96)]
    nx: usize,
    #[arg(long, default_value_t = 96)]
    nz: usize,
    #[arg(long, default_value_t = 0.4)]
    depth_m: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ReduceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    n_remove: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ImageArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Bpa)]
    method: MethodArg,
    /// Soil model JSON for the background permittivity; dry default soil when omitted.
    #[arg(long)]
    soil: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    antenna_height_m: f64,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    depth_m: f64,
    /// BAA: keep this many singular components.
    #[arg(long, conflicts_with = "tau")]
    rank: Option<usize>,
    /// BAA: keep singular values at or above tau times the largest.
    #[arg(long)]
    tau: Option<f64>,
    /// BPA: multiply by the round-trip spreading factor.
    #[arg(long)]
    spreading_compensation: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write a PGM preview.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ScenarioArgs {
    #[arg(long, default_value = "reference")]
    scenario: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Bpa)]
    imaging: MethodArg,
    /// 8 moisture bags, or 9 with a dry class.
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long)]
    snr_db: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct DatasetArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Dataset directory (relative paths are placed under --out-dir).
    #[arg(long, default_value = "dataset")]
    dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = LearnerArg::Cnn)]
    learner: LearnerArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    /// Scenario id, or `all`.
    #[arg(long, default_value = "reference")]
    scenario: String,
    #[arg(long, value_enum, default_value_t = LearnerArg::Cnn)]
    learner: LearnerArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Bpa)]
    imaging: MethodArg,
    #[arg(long, default_value_t = 8)]
    classes: usize,
}

#[derive(Args, Debug, Serialize)]
struct TrackArgs {
    #[arg(long, value_enum, default_value_t = LearnerArg::Cnn)]
    learner: LearnerArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Bpa)]
    imaging: MethodArg,
    /// Dataset directory whose acquisition and pipeline the scans reuse; generated when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Trained model (MWNN or MWKN); trained on the dataset when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Independent moisture measurement recorded alongside the track.
    #[arg(long)]
    reference_sm: Option<f64>,
    #[arg(long, default_value_t = 11)]
    scans: usize,
    #[arg(long, default_value_t = 14.0)]
    interval_min: f64,
}

#[derive(Args, Debug, Serialize)]
struct RobustnessArgs {
    #[arg(long)]
    sm: f64,
    #[arg(long, value_enum, default_value_t = KindArg::Pebble)]
    kind: KindArg,
    #[arg(long, value_enum, default_value_t = DensityArg::High)]
    density: DensityArg,
    #[arg(long, value_enum, default_value_t = LearnerArg::Cnn)]
    learner: LearnerArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Bpa)]
    imaging: MethodArg,
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    verbose: bool,
}

impl Ctx {
    fn out_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Error> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn acquisition(path: &Option<PathBuf>) -> Result<AcquisitionConfig, Error> {
    let cfg = match path {
        Some(p) => read_json(p)?,
        None => AcquisitionConfig::reference(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn classes(count: usize) -> Result<MoistureClassSet, Error> {
    MoistureClassSet::with_count(count)
}

fn options(classes: MoistureClassSet, snr_db: Option<f64>) -> ScenarioOptions {
    let mut opts = ScenarioOptions { classes, ..ScenarioOptions::default() };
    if snr_db.is_some() {
        opts.pipeline.snr_db = snr_db;
    }
    opts
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Value, Error> {
    let scene = Scene::from_json(&fs::read_to_string(&a.scene)?)?;
    let cfg = acquisition(&a.config)?;
    let grid = ImagingGrid::under_scan(cfg.scan_length_m, a.depth_m, a.nx, a.nz)?;
    let contrast = rasterize_scene::<f64>(&scene, &grid)?;
    let noise = NoiseSpec { snr_db: a.snr_db, clutter_gain: a.clutter_gain, rng_seed: ctx.seed };
    let bscan = simulate_bscan(&contrast, &cfg, &noise)?;
    let out = ctx.out_path(&a.out);
    bscan.write(&out)?;
    Ok(json!({ "scene": scene, "acquisition": cfg, "grid": grid, "noise": noise, "outputs": [out] }))
}

fn reduce(ctx: &Ctx, a: &ReduceArgs) -> Result<Value, Error> {
    let bscan = BScan64::read(&a.input)?;
    let spec = ClutterReductionSpec { n_remove: a.n_remove };
    let reduced = svd_clutter_reduce(&bscan, &spec)?;
    let out = ctx.out_path(&a.out);
    reduced.write(&out)?;
    Ok(json!({ "reduction": spec, "outputs": [out] }))
}

fn image(ctx: &Ctx, a: &ImageArgs) -> Result<Value, Error> {
    let bscan = BScan64::read(&a.input)?;
    let soil: SoilModel = match &a.soil {
        Some(p) => read_json(p)?,
        None => SoilModel::default(),
    };
    soil.validate()?;
    let eps_bg = soil.background_permittivity();
    let scan_length = bscan.pos_m.last().copied().unwrap_or(0.0) - bscan.pos_m[0];
    let (nx, nz, truncation) = match a.method {
        MethodArg::Bpa => (a.nx.unwrap_or(96), a.nz.unwrap_or(96), None),
        MethodArg::Baa => {
            let t = match (a.rank, a.tau) {
                (Some(rank), _) => TruncationSpec::Rank { rank },
                (None, Some(tau)) => TruncationSpec::RelativeThreshold { tau },
                (None, None) => TruncationSpec::default(),
            };
            (a.nx.unwrap_or(24), a.nz.unwrap_or(12), Some(t))
        }
    };
    let grid = ImagingGrid::new(bscan.pos_m[0], bscan.pos_m[0] + scan_length, 0.0, a.depth_m, nx, nz)?;
    let img = match truncation {
        None => {
            let opts = BpaOptions { eps_bg, antenna_height_m: a.antenna_height_m, spreading_compensation: a.spreading_compensation };
            bpa_image(&bscan, &grid, &opts)?
        }
        Some(t) => {
            let cfg = AcquisitionConfig { antenna_height_m: a.antenna_height_m, ..AcquisitionConfig::reference() };
            baa_image(&bscan, &grid, &cfg, eps_bg, &t)?
        }
    };
    let img = img.with_meta(ImageMeta { source_band: None, pipeline: json!({ "method": a.method, "truncation": truncation }) });
    let out = ctx.out_path(&a.out);
    img.write(&out)?;
    let mut outputs = vec![out];
    if let Some(pgm) = &a.pgm {
        let p = ctx.out_path(pgm);
        fs::write(&p, img.to_pgm())?;
        outputs.push(p);
    }
    Ok(json!({ "soil": soil, "grid": grid, "truncation": truncation, "outputs": outputs }))
}

fn dataset(ctx: &Ctx, a: &DatasetArgs) -> Result<Value, Error> {
    let spec = ScenarioSpec::by_id(&a.scenario.scenario)?;
    let opts = options(classes(a.scenario.classes)?, a.scenario.snr_db);
    ctx.log(format!("generating scenario {}", spec.id));
    let prepared = prepare_scenario(&opts, &spec, a.scenario.imaging.into(), ctx.seed)?;
    let dir = ctx.out_path(&a.dir);
    write_dataset(&dir, &prepared.dataset, &prepared.samples, &prepared.split)?;
    Ok(json!({ "scenario": spec, "dataset": prepared.dataset, "samples": prepared.samples.len(), "outputs": [dir] }))
}

fn write_model(model: &TrainedModel<f64>, path: &Path) -> Result<(), Error> {
    match model {
        TrainedModel::Cnn(m) => m.write(path),
        TrainedModel::Knn(m) => m.write(path),
    }
}

fn read_model(path: &Path) -> Result<TrainedModel<f64>, Error> {
    let bytes = fs::read(path)?;
    match bytes.get(..4) {
        Some(b"MWNN") => Ok(TrainedModel::Cnn(CnnModel::from_bytes(&bytes)?)),
        Some(b"MWKN") => Ok(TrainedModel::Knn(KnnModel::from_bytes(&bytes)?)),
        _ => Err(Error::Format(format!("{} is neither a CNN nor a KNN model file", path.display()))),
    }
}

fn train(ctx: &Ctx, a: &TrainArgs) -> Result<Value, Error> {
    let (manifest, samples) = read_dataset(&a.dataset)?;
    let n_classes = manifest.spec.classes.len();
    let opts = ScenarioOptions { classes: manifest.spec.classes.clone(), pipeline: manifest.spec.pipeline.clone(), ..ScenarioOptions::default() };
    let (model, history) = train_learner(a.learner.into(), &samples, &manifest.split, n_classes, &opts, ctx.seed)?;
    let (confusion, accuracy) = evaluate_model(&model, &samples, &manifest.split.test, n_classes)?;
    let out = ctx.out_path(&a.out);
    write_model(&model, &out)?;
    Ok(json!({ "learner": a.learner, "test_accuracy": accuracy, "confusion": confusion, "history": history, "outputs": [out] }))
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<Value, Error> {
    let specs = if a.scenario == "all" { ScenarioSpec::table() } else { vec![ScenarioSpec::by_id(&a.scenario)?] };
    let opts = options(classes(a.classes)?, None);
    let mut reports: Vec<ScenarioReport> = Vec::new();
    let mut outputs = Vec::new();
    for spec in &specs {
        ctx.log(format!("scenario {}", spec.id));
        let prepared = prepare_scenario(&opts, spec, a.imaging.into(), ctx.seed)?;
        let report = report_for(&opts, &prepared, spec, a.learner.into(), a.imaging.into(), ctx.seed)?;
        outputs.push(ctx.write(&format!("confusion_{}.csv", spec.id), report.confusion.to_csv())?);
        outputs.push(ctx.write(&format!("confusion_{}.pgm", spec.id), report.confusion.to_pgm(16))?);
        reports.push(report);
    }
    let table = ScenarioReport::table(&reports);
    outputs.push(ctx.write("report.txt", &table)?);
    let body = if reports.len() == 1 { serde_json::to_value(&reports[0])? } else { json!({ "reports": reports }) };
    outputs.push(ctx.write("report.json", serde_json::to_string_pretty(&body)?)?);
    eprint!("{table}");
    Ok(json!({ "report": body, "outputs": outputs }))
}

fn track(ctx: &Ctx, a: &TrackArgs) -> Result<Value, Error> {
    if a.scans < 2 {
        return Err(Error::Domain("tracking needs at least two scans".into()));
    }
    let (dataset_spec, samples, split) = match &a.dataset {
        Some(dir) => {
            let (m, s) = read_dataset(dir)?;
            (m.spec, s, m.split)
        }
        None => {
            let opts = ScenarioOptions::default();
            let p = prepare_scenario(&opts, &ScenarioSpec::by_id("reference")?, a.imaging.into(), ctx.seed)?;
            (p.dataset, p.samples, p.split)
        }
    };
    let model = match &a.model {
        Some(p) => read_model(p)?,
        None => {
            let opts = ScenarioOptions { classes: dataset_spec.classes.clone(), pipeline: dataset_spec.pipeline.clone(), ..ScenarioOptions::default() };
            train_learner(a.learner.into(), &samples, &split, dataset_spec.classes.len(), &opts, ctx.seed)?.0
        }
    };
    let mid = dataset_spec.classes.levels[dataset_spec.classes.len() / 2];
    let imager = BandImager::new(&dataset_spec.acquisition, &dataset_spec.band_plan, &dataset_spec.pipeline, mid)?;
    let leak = LeakScenario { times_min: (1..=a.scans).map(|i| a.interval_min * i as f64).collect(), ..LeakScenario::default() };
    let scans = leak.scans(&imager, ctx.seed)?;
    let track = track_leak(&leak.times_min, &scans, &model, &dataset_spec.classes, imager.plan.bands.len(), a.reference_sm)?;
    let json_path = ctx.write("track.json", serde_json::to_string_pretty(&track)?)?;
    let csv_path = ctx.write("track.csv", track.to_csv())?;
    Ok(json!({ "leak": leak, "track": track, "outputs": [json_path, csv_path] }))
}

fn robustness(ctx: &Ctx, a: &RobustnessArgs) -> Result<Value, Error> {
    let kind = match a.kind {
        KindArg::Pebble => ClutterKind::Pebble,
        KindArg::Root => ClutterKind::Root,
    };
    let density = match a.density {
        DensityArg::None => ClutterDensity::None,
        DensityArg::Low => ClutterDensity::Low,
        DensityArg::Moderate => ClutterDensity::Moderate,
        DensityArg::High => ClutterDensity::High,
    };
    let report = run_clutter_robustness(a.sm, kind, density, a.learner.into(), a.imaging.into(), ctx.seed)?;
    let out = ctx.write("robustness.json", serde_json::to_string_pretty(&report)?)?;
    Ok(json!({ "report": report, "outputs": [out] }))
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    fs::create_dir_all(&cli.out_dir)?;
    let ctx = Ctx { seed: cli.seed, out_dir: cli.out_dir.clone(), verbose: cli.verbose };
    let (name, args, result) = match &cli.command {
        Command::Simulate(a) => ("simulate", serde_json::to_value(a)?, simulate(&ctx, a)?),
        Command::Reduce(a) => ("reduce", serde_json::to_value(a)?, reduce(&ctx, a)?),
        Command::Image(a) => ("image", serde_json::to_value(a)?, image(&ctx, a)?),
        Command::Dataset(a) => ("dataset", serde_json::to_value(a)?, dataset(&ctx, a)?),
        Command::Train(a) => ("train", serde_json::to_value(a)?, train(&ctx, a)?),
        Command::Eval(a) => ("eval", serde_json::to_value(a)?, eval(&ctx, a)?),
        Command::Track(a) => ("track", serde_json::to_value(a)?, track(&ctx, a)?),
        Command::Robustness(a) => ("robustness", serde_json::to_value(a)?, robustness(&ctx, a)?),
    };
    let run = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cli.seed,
        "threads": cli.threads,
        "args": args,
        "resolved": result,
    });
    fs::write(cli.out_dir.join("run.json"), serde_json::to_string_pretty(&run)?)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
