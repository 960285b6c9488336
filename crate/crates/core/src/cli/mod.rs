//! The `geoshap` command line.

pub mod ingest;
pub mod manifest;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::bootstrap::{bootstrap, BootstrapConfig, BootstrapSummary};
use crate::analysis::{global_importance, pdp_points, svc_extract, Bandwidth, KernelShape, SvcConfig};
use crate::bridge::{server::ModelServer, BridgedOracle, BridgedTrainer, ServerCommand};
use crate::data::{BackgroundSet, DataSet};
use crate::error::{Error, Result};
use crate::explanation::{ExplanationDocument, ExplanationSet};
use crate::game::{PredictionOracle, Trainer};
use crate::kernel::{explain, ExplainConfig};
use crate::linalg::SolverPath;
use crate::models::{cross_validated_r2, gen_nonlinear, gen_svc_with, GbtConfig, ModelArtifact, ModelSpec, SvcOptions};

use ingest::{ingest_csv, ColumnSpec};
use manifest::{default_manifest_path, InputDigest, Manifest, ManifestCore};

pub const CV_FOLDS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "geoshap", version, about = "GeoShapley explanations for geospatial models")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "GEOSHAP_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known coefficient surfaces.
    Simulate(SimulateArgs),
    /// Fit (or connect to) a model and explain every row.
    Explain(ExplainArgs),
    /// Global importance table from an explanation file.
    Importance(ImportanceArgs),
    /// Primary-effect dependence points for one feature.
    Pdp(PdpArgs),
    /// Spatially varying coefficient surface for one feature.
    Svc(SvcArgs),
    /// Bootstrap intervals by resampling, retraining and re-explaining.
    Bootstrap(BootstrapArgs),
    /// Serve a saved model over the bridge protocol on stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Svc,
    Nonlinear,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "svc")]
    pub process: Process,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub noise_sd: f64,
    /// Extra zero-coefficient features (svc process).
    #[arg(long, default_value_t = 0)]
    pub null_features: usize,
    #[arg(long, default_value_t = 2.0)]
    pub beta1_slope: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Truth sidecar; defaults to `<out stem>.truth.csv`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, serde::Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Coordinate columns, in model order.
    #[arg(long, value_delimiter = ',', default_values = ["u", "v"])]
    pub coords: Vec<String>,
    #[arg(long, default_value = "y")]
    pub target: String,
    /// The data has no target column.
    #[arg(long)]
    pub no_target: bool,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    /// Feature columns; all remaining columns when omitted.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
}

impl DataArgs {
    fn spec(&self) -> Result<ColumnSpec> {
        if self.coords.len() != 2 {
            return Err(Error::Config(format!(
                "--coords takes two column names, got {}",
                self.coords.len()
            )));
        }
        Ok(ColumnSpec {
            coords: [self.coords[0].clone(), self.coords[1].clone()],
            target: (!self.no_target).then(|| self.target.clone()),
            id: Some(self.id_col.clone()),
            features: self.features.clone(),
            exclude: self.exclude.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    KernelRidge,
    Gbt,
}

#[derive(Debug, Args, Clone, serde::Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "gbt")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 1.0)]
    pub subsample: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min_split_gain: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lengthscale: f64,
    #[arg(long, default_value_t = 0.01)]
    pub ridge: f64,
    /// Load a saved model instead of training.
    #[arg(long, conflicts_with = "model_cmd")]
    pub model_file: Option<PathBuf>,
    /// Run the model in an external process speaking the bridge protocol.
    #[arg(long)]
    pub model_cmd: Option<String>,
    /// Seconds to wait for each bridge reply.
    #[arg(long, default_value_t = 60.0)]
    pub bridge_timeout: f64,
}

impl ModelArgs {
    fn spec(&self, seed: u64) -> ModelSpec {
        match self.model {
            ModelKind::Linear => ModelSpec::Linear,
            ModelKind::KernelRidge => ModelSpec::KernelRidge {
                lengthscale: self.lengthscale,
                ridge: self.ridge,
            },
            ModelKind::Gbt => ModelSpec::BoostedTrees(GbtConfig {
                trees: self.trees,
                depth: self.depth,
                rate: self.learning_rate,
                seed,
                min_leaf: self.min_leaf,
                subsample: self.subsample,
                min_split_gain: self.min_split_gain,
            }),
        }
    }

    fn server_command(&self) -> Result<Option<ServerCommand>> {
        let Some(cmd) = &self.model_cmd else {
            return Ok(None);
        };
        if !(self.bridge_timeout > 0.0 && self.bridge_timeout.is_finite()) {
            return Err(Error::Config("bridge timeout must be positive".into()));
        }
        Ok(Some(
            ServerCommand::shell(cmd).with_timeout(Duration::from_secs_f64(self.bridge_timeout)),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverArg {
    Qr,
    Normal,
}

#[derive(Debug, Args, Clone, serde::Serialize)]
pub struct ExplainOptions {
    /// Background rows sampled from the data.
    #[arg(long, default_value_t = crate::data::DEFAULT_BACKGROUND_SIZE)]
    pub background: usize,
    /// Seed for the background sample; defaults to `--seed`.
    #[arg(long)]
    pub background_seed: Option<u64>,
    /// Coalition budget per row.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave out the location player; coordinates keep the explained row's values.
    #[arg(long)]
    pub no_geo: bool,
    #[arg(long, value_enum, default_value = "qr")]
    pub solver: SolverArg,
}

impl ExplainOptions {
    fn config(&self) -> ExplainConfig {
        ExplainConfig {
            budget: self.budget,
            seed: self.seed,
            include_geo: !self.no_geo,
            solver: match self.solver {
                SolverArg::Qr => SolverPath::Qr,
                SolverArg::Normal => SolverPath::NormalEquations,
            },
        }
    }

    fn background_seed(&self) -> u64 {
        self.background_seed.unwrap_or(self.seed)
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub options: ExplainOptions,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the trained model here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    /// Skip the cross-validated R².
    #[arg(long)]
    pub no_cv: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub explanations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PdpArgs {
    #[arg(long)]
    pub explanations: PathBuf,
    #[arg(long)]
    pub feature: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelArg {
    Bisquare,
    Uniform,
    Gaussian,
}

impl From<KernelArg> for KernelShape {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Bisquare => KernelShape::Bisquare,
            KernelArg::Uniform => KernelShape::Uniform,
            KernelArg::Gaussian => KernelShape::Gaussian,
        }
    }
}

#[derive(Debug, Args, Clone, serde::Serialize)]
pub struct SvcOptionsArgs {
    /// `auto`, a neighbor count, or a distance for the Gaussian kernel.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    #[arg(long, value_enum, default_value = "bisquare")]
    pub kernel: KernelArg,
}

impl SvcOptionsArgs {
    fn config(&self) -> Result<SvcConfig> {
        let kernel: KernelShape = self.kernel.into();
        let bandwidth = match (self.bandwidth.as_str(), kernel) {
            ("auto", _) => Bandwidth::Auto,
            (s, KernelShape::Gaussian) => Bandwidth::Fixed(
                s.parse()
                    .map_err(|_| Error::Config(format!("bandwidth `{s}` is not a distance")))?,
            ),
            (s, _) => Bandwidth::Adaptive(
                s.parse()
                    .map_err(|_| Error::Config(format!("bandwidth `{s}` is not a neighbor count")))?,
            ),
        };
        Ok(SvcConfig { bandwidth, kernel })
    }
}

#[derive(Debug, Args)]
pub struct SvcArgs {
    #[arg(long)]
    pub explanations: PathBuf,
    #[arg(long)]
    pub feature: String,
    #[command(flatten)]
    pub svc: SvcOptionsArgs,
    /// Bootstrap summary used to mask locations whose interval contains zero.
    #[arg(long)]
    pub bootstrap: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub options: ExplainOptions,
    #[arg(long, default_value_t = crate::analysis::bootstrap::DEFAULT_REPLICATES)]
    pub replicates: usize,
    /// Features whose local coefficients also get intervals.
    #[arg(long = "svc-feature", value_delimiter = ',')]
    pub svc_features: Vec<String>,
    #[command(flatten)]
    pub svc: SvcOptionsArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Saved model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Refuse fit requests.
    #[arg(long)]
    pub no_fit: bool,
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads.unwrap_or(0);
    if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        return pool.install(|| dispatch(cli.command));
    }
    dispatch(cli.command)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Explain(a) => explain_cmd(&a),
        Command::Importance(a) => importance_cmd(&a),
        Command::Pdp(a) => pdp_cmd(&a),
        Command::Svc(a) => svc_cmd(&a),
        Command::Bootstrap(a) => bootstrap_cmd(&a),
        Command::Serve(a) => serve_cmd(&a),
    }
}

struct Run {
    core: ManifestCore,
    started: Instant,
    timings: BTreeMap<String, f64>,
    results: serde_json::Value,
    outputs: Vec<String>,
}

impl Run {
    fn new(command: &str, config: serde_json::Value) -> Self {
        Run {
            core: ManifestCore::new(command, config),
            started: Instant::now(),
            timings: BTreeMap::new(),
            results: json!({}),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.core.inputs.push(InputDigest::of(path)?);
        Ok(())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.timings.insert(stage.into(), t.elapsed().as_secs_f64());
        Ok(out)
    }

    fn hash(&self) -> Result<String> {
        self.core.hash()
    }

    fn finish(mut self, artifact: &Path, manifest: Option<&PathBuf>) -> Result<()> {
        self.timings.insert("total".into(), self.started.elapsed().as_secs_f64());
        let path = manifest.cloned().unwrap_or_else(|| default_manifest_path(artifact));
        let m = Manifest {
            manifest_hash: self.hash()?,
            core: self.core,
            results: self.results,
            outputs: self.outputs,
            threads: rayon::current_num_threads(),
            timings_seconds: self.timings,
        };
        m.write(&path)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut run = Run::new(
        "simulate",
        json!({
            "process": a.process,
            "n": a.n,
            "noise_sd": a.noise_sd,
            "null_features": a.null_features,
            "beta1_slope": a.beta1_slope,
            "out": a.out,
        }),
    );
    run.core.seeds.insert("seed".into(), a.seed);
    let truth = run.time("generate", || match a.process {
        Process::Svc => gen_svc_with(
            a.n,
            a.seed,
            a.noise_sd,
            &SvcOptions {
                beta1_slope: a.beta1_slope,
                null_features: a.null_features,
            },
        ),
        Process::Nonlinear => gen_nonlinear(a.n, a.seed),
    })?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.out.with_file_name(format!("{stem}.truth.csv"))
    });
    let hash = run.hash()?;
    output::write_dataset_csv(&a.out, &truth.dataset, &hash)?;
    output::write_truth_csv(&truth_path, &truth, &hash)?;
    run.outputs = vec![a.out.display().to_string(), truth_path.display().to_string()];
    run.finish(&a.out, a.manifest.as_ref())
}

/// A model to explain, plus a way to retrain it when one exists.
struct Fitted {
    oracle: Box<dyn PredictionOracle>,
    trainer: Option<Box<dyn Trainer>>,
    artifact: Option<ModelArtifact>,
}

fn fit_model(data: &DataSet, model: &ModelArgs, seed: u64) -> Result<Fitted> {
    if let Some(cmd) = model.server_command()? {
        let oracle = BridgedOracle::connect(&cmd)?;
        let caps = oracle.capabilities();
        if caps.n_columns != data.n_columns() {
            return Err(Error::ColumnMismatch {
                expected: data.n_columns(),
                actual: caps.n_columns,
            });
        }
        let trainer: Option<Box<dyn Trainer>> = caps
            .trainable
            .then(|| Box::new(BridgedTrainer { command: cmd.clone() }) as Box<dyn Trainer>);
        return Ok(Fitted {
            oracle: Box::new(oracle),
            trainer,
            artifact: None,
        });
    }
    if let Some(path) = &model.model_file {
        let artifact = ModelArtifact::load(path)?;
        if artifact.feature_names != data.feature_names() {
            return Err(Error::Data(format!(
                "model was trained on features {:?}, data has {:?}",
                artifact.feature_names,
                data.feature_names()
            )));
        }
        return Ok(Fitted {
            oracle: Box::new(artifact.model.clone()),
            trainer: Some(Box::new(artifact.model.spec())),
            artifact: Some(artifact),
        });
    }
    let spec = model.spec(seed);
    let y = data
        .target()
        .ok_or_else(|| Error::Config("training a built-in model needs a target column".into()))?;
    let trained = spec.train(&data.model_matrix(), y)?;
    Ok(Fitted {
        oracle: Box::new(trained.clone()),
        trainer: Some(Box::new(spec)),
        artifact: Some(ModelArtifact::new(trained, data.feature_names().to_vec())),
    })
}

fn load_data(run: &mut Run, args: &DataArgs) -> Result<DataSet> {
    run.input(&args.data)?;
    let ingested = ingest_csv(&args.data, &args.spec()?)?;
    run.results["rows_used"] = json!(ingested.dataset.n_rows());
    run.results["rows_dropped"] = json!(ingested.dropped);
    Ok(ingested.dataset)
}

fn model_inputs(run: &mut Run, model: &ModelArgs) -> Result<()> {
    if let Some(path) = &model.model_file {
        run.input(path)?;
    }
    Ok(())
}

fn explain_cmd(a: &ExplainArgs) -> Result<()> {
    let mut run = Run::new(
        "explain",
        json!({
            "data": a.data,
            "model": a.model,
            "options": a.options,
            "out": a.out,
            "cv_folds": if a.no_cv { 0 } else { CV_FOLDS },
        }),
    );
    run.core.seeds.insert("seed".into(), a.options.seed);
    run.core.seeds.insert("background_seed".into(), a.options.background_seed());
    model_inputs(&mut run, &a.model)?;
    let data = load_data(&mut run, &a.data)?;
    let fitted = run.time("fit", || fit_model(&data, &a.model, a.options.seed))?;
    if let Some(y) = data.target().filter(|_| !a.no_cv) {
        if let Some(trainer) = &fitted.trainer {
            let r2 = run.time("cross_validation", || {
                cross_validated_r2(trainer.as_ref(), &data.model_matrix(), y, CV_FOLDS, a.options.seed)
            })?;
            eprintln!("{CV_FOLDS}-fold cross-validated R^2: {r2}");
            run.results["cv_r2"] = json!(r2);
        }
    }
    let background = BackgroundSet::sample(&data, a.options.background, a.options.background_seed())?;
    let explanations = run.time("explain", || {
        explain(&data, fitted.oracle.as_ref(), &background, &a.options.config())
    })?;
    run.results["max_efficiency_gap"] = json!(explanations.max_efficiency_gap());
    let hash = run.hash()?;
    output::write_explanations(&a.out, &explanations, &hash)?;
    run.outputs.push(a.out.display().to_string());
    if let Some(path) = &a.save_model {
        let artifact = fitted
            .artifact
            .as_ref()
            .ok_or_else(|| Error::Config("a bridged model cannot be saved locally".into()))?;
        artifact.save(path)?;
        run.outputs.push(path.display().to_string());
    }
    run.finish(&a.out, a.manifest.as_ref())
}

fn read_explanations(run: &mut Run, path: &Path) -> Result<ExplanationSet> {
    run.input(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ExplanationDocument = serde_json::from_str(&text)?;
    ExplanationSet::from_document(&doc)
}

fn importance_cmd(a: &ImportanceArgs) -> Result<()> {
    let mut run = Run::new("importance", json!({ "out": a.out }));
    let ex = read_explanations(&mut run, &a.explanations)?;
    let table = global_importance(&ex)?;
    output::write_importance_csv(&a.out, &table, &run.hash()?)?;
    run.outputs.push(a.out.display().to_string());
    run.finish(&a.out, a.manifest.as_ref())
}

fn pdp_cmd(a: &PdpArgs) -> Result<()> {
    let mut run = Run::new("pdp", json!({ "feature": a.feature, "out": a.out }));
    let ex = read_explanations(&mut run, &a.explanations)?;
    let points = pdp_points(&ex, &a.feature)?;
    output::write_pdp_csv(&a.out, &points, &run.hash()?)?;
    run.outputs.push(a.out.display().to_string());
    run.finish(&a.out, a.manifest.as_ref())
}

fn svc_cmd(a: &SvcArgs) -> Result<()> {
    let mut run = Run::new(
        "svc",
        json!({ "feature": a.feature, "svc": a.svc, "out": a.out }),
    );
    let ex = read_explanations(&mut run, &a.explanations)?;
    let mut config = a.svc.config()?;
    let summary: Option<BootstrapSummary> = match &a.bootstrap {
        Some(path) => {
            run.input(path)?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Some(serde_json::from_str(&text)?)
        }
        None => None,
    };
    if let Some(s) = &summary {
        // Intervals only line up with the bandwidth they were computed at.
        if let Some((_, bw)) = s.svc_bandwidths.iter().find(|(f, _)| *f == a.feature) {
            config.bandwidth = match config.kernel {
                KernelShape::Gaussian => Bandwidth::Fixed(*bw),
                _ => Bandwidth::Adaptive(*bw as usize),
            };
        }
    }
    let mut surface = run.time("svc", || svc_extract(&ex, &a.feature, &config))?;
    if let Some(s) = &summary {
        crate::analysis::mask_by_ci(&mut surface, s)?;
    }
    run.results["bandwidth"] = json!(surface.bandwidth);
    output::write_svc_geojson(&a.out, &surface, &run.hash()?)?;
    run.outputs.push(a.out.display().to_string());
    run.finish(&a.out, a.manifest.as_ref())
}

fn bootstrap_cmd(a: &BootstrapArgs) -> Result<()> {
    let mut run = Run::new(
        "bootstrap",
        json!({
            "data": a.data,
            "model": a.model,
            "options": a.options,
            "replicates": a.replicates,
            "svc_features": a.svc_features,
            "svc": a.svc,
            "out": a.out,
        }),
    );
    run.core.seeds.insert("seed".into(), a.options.seed);
    run.core.seeds.insert("background_seed".into(), a.options.background_seed());
    model_inputs(&mut run, &a.model)?;
    let data = load_data(&mut run, &a.data)?;
    let trainer: Box<dyn Trainer> = match a.model.server_command()? {
        Some(command) => Box::new(BridgedTrainer { command }),
        None => match &a.model.model_file {
            Some(path) => Box::new(ModelArtifact::load(path)?.model.spec()),
            None => Box::new(a.model.spec(a.options.seed)),
        },
    };
    let background = BackgroundSet::sample(&data, a.options.background, a.options.background_seed())?;
    let config = BootstrapConfig {
        replicates: a.replicates,
        seed: a.options.seed,
        explain: a.options.config(),
        svc_features: a.svc_features.clone(),
        svc: a.svc.config()?,
    };
    let summary = run.time("bootstrap", || bootstrap(&data, trainer.as_ref(), &background, &config))?;
    run.results["succeeded"] = json!(summary.succeeded);
    run.results["failed"] = json!(summary.failed);
    output::write_bootstrap(&a.out, &summary, &run.hash()?)?;
    run.outputs.push(a.out.display().to_string());
    run.finish(&a.out, a.manifest.as_ref())
}

fn serve_cmd(a: &ServeArgs) -> Result<()> {
    let artifact = match ModelArtifact::load(&a.model) {
        Ok(m) => m,
        Err(e) => {
            // Tell a waiting engine why no ready message is coming.
            let msg = crate::bridge::Message::Error {
                id: None,
                message: e.to_string(),
            };
            if let Ok(line) = msg.encode() {
                print!("{line}");
            }
            return Err(e);
        }
    };
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    ModelServer::new(artifact.model, !a.no_fit).serve(stdin.lock(), stdout.lock())
}
