//! The `warmstop` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal error. Failures
//! print one line to stderr: `error kind=<tag> message=<json string>`.
//!
//! Seeds: the global `--seed` is used directly by `synth`, the RCIW bootstrap
//! and the evaluation bootstrap (each derives its own stream internally);
//! fold assignment and kernel generation receive `seed::derive(seed, "folds")`
//! and `seed::derive(seed, "kernels")`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{heuristic_stop, sop_stop, HeuristicConfig, HeuristicKind};
use crate::data::SegmentDataset;
use crate::error::{Error, Result};
use crate::evaluation::{
    classification_table, compare_reports, evaluate, BenchmarkRow, EvalConfig, MeasurementLen, MethodRecords,
    SeriesRow,
};
use crate::io::{self, StopRecord};
use crate::rocket::{cross_validate, CvPrediction, RocketConfig, RocketModel};
use crate::seed;
use crate::segmentation::{assign_folds, build_dataset, label_violations, SamplingConfig};
use crate::steady_state::{annotate_corpus, SteadyStateConfig};
use crate::stopper::{run_corpus, FoldModels, StopConfig, WindowClassifier};
use crate::synth::{generate_synthetic_corpus, StDistribution, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "warmstop", version, about = "Warm-up detection and dynamic warm-up stopping")]
pub struct Cli {
    /// Global seed; every stage derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON file overriding module configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with ground-truth annotations and a SOP table.
    Synth(SynthArgs),
    /// Annotate steady-state iterations.
    Annotate(AnnotateArgs),
    /// Sample labeled segments and assign benchmark folds.
    BuildDataset(BuildDatasetArgs),
    /// Cross-validate ROCKET, writing one model per held-out fold.
    Train(TrainArgs),
    /// Classify the segments of a dataset with one model.
    Predict(PredictArgs),
    /// Replay warm-up stopping over a corpus.
    Simulate(SimulateArgs),
    /// Score replay results against steady-state ground truth.
    Evaluate(EvaluateArgs),
    /// Compare the framework with baselines and emit summary tables.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub forks: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub spike_probability: Option<f64>,
    #[arg(long)]
    pub warmup_fluctuation: Option<f64>,
    #[arg(long)]
    pub st_min: Option<usize>,
    #[arg(long)]
    pub st_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub fold_map: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub fold_map: PathBuf,
    /// Directory receiving `fold-<i>.model` and `predictions.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub kernels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Model,
    Sop,
    Cv,
    Rciw,
    Kld,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Method::Model)]
    pub method: Method,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory of fold models (method `model`).
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub fold_map: Option<PathBuf>,
    /// SOP table (method `sop`).
    #[arg(long)]
    pub sop_config: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub sop_config: Option<PathBuf>,
    /// `name=path` of a simulate results file; repeatable. The name `sop`
    /// takes measurement counts from the SOP table.
    #[arg(long = "results", required = true)]
    pub results: Vec<String>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Per-benchmark report; per-series rows go to `<out>.series.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, default_value = "model")]
    pub framework: String,
    /// Held-out predictions from `train`, for the classification table.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Output directory for the summary tables.
    #[arg(long)]
    pub out: PathBuf,
}

/// Every module configuration, overridable as a whole or in part from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub synth: SynthSpec,
    pub steady_state: SteadyStateConfig,
    pub sampling: SamplingConfig,
    pub rocket: RocketConfig,
    pub stop: StopConfig,
    pub heuristics: HeuristicOverrides,
    pub evaluation: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicOverrides {
    pub window: Option<usize>,
    pub stability_run: usize,
    pub cv_threshold: f64,
    pub rciw_threshold: f64,
    pub kld_threshold: f64,
    pub bootstrap_iters: usize,
}

impl Default for HeuristicOverrides {
    fn default() -> Self {
        let cv = HeuristicConfig::new(HeuristicKind::Cv);
        Self {
            window: None,
            stability_run: cv.stability_run,
            cv_threshold: cv.threshold,
            rciw_threshold: HeuristicConfig::new(HeuristicKind::Rciw).threshold,
            kld_threshold: HeuristicConfig::new(HeuristicKind::Kld).threshold,
            bootstrap_iters: cv.bootstrap_iters,
        }
    }
}

impl HeuristicOverrides {
    fn config(&self, kind: HeuristicKind, stop: &StopConfig, seed: u64) -> HeuristicConfig {
        let mut c = HeuristicConfig::new(kind);
        c.window = self.window.unwrap_or(stop.window);
        c.stability_run = self.stability_run;
        c.threshold = match kind {
            HeuristicKind::Cv => self.cv_threshold,
            HeuristicKind::Rciw => self.rciw_threshold,
            HeuristicKind::Kld => self.kld_threshold,
        };
        c.bootstrap_iters = self.bootstrap_iters;
        c.cap = stop.max_warmup_iterations;
        c.seed = seed;
        c
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Sidecar written next to every artifact. Holds no timestamps, so identical
/// runs produce identical manifests.
#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    config: &'a PipelineConfig,
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut reader = BufReader::new(File::open(path)?);
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Tracks files written by a command so a failure removes all of them.
struct Run<'a> {
    command: &'static str,
    seed: u64,
    config: &'a PipelineConfig,
    inputs: Vec<PathBuf>,
    written: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(command: &'static str, cli: &Cli, config: &'a PipelineConfig) -> Self {
        Self {
            command,
            seed: cli.seed,
            config,
            inputs: vec![],
            written: vec![],
        }
    }

    fn input(&mut self, path: &Path) -> Result<PathBuf> {
        if !path.exists() {
            return Err(Error::Usage(format!("input {} does not exist", path.display())));
        }
        self.inputs.push(path.to_path_buf());
        Ok(path.to_path_buf())
    }

    fn write<F>(&mut self, path: &Path, write: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        self.written.push(path.to_path_buf());
        io::write_atomically(path, write)
    }

    /// Writes the manifest for `anchor`, covering every output so far.
    fn finish(&mut self, anchor: &Path) -> Result<()> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            seed: self.seed,
            inputs,
            outputs: self.written.iter().map(|p| p.display().to_string()).collect(),
            config: self.config,
        };
        let path = manifest_path(anchor);
        self.write(&path, |out| {
            serde_json::to_writer_pretty(&mut *out, &manifest)?;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    match &cli.config {
        None => Ok(PipelineConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                location: path.display().to_string(),
                message: e.to_string(),
            })
        }
    }
}

/// Parses arguments from the process and runs; returns the exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}

pub fn error_line(e: &Error) -> String {
    format!(
        "error kind={} message={}",
        e.kind(),
        serde_json::to_string(&e.to_string()).unwrap_or_default()
    )
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => EXIT_USAGE,
        _ if e.is_data_error() => EXIT_DATA,
        _ => EXIT_INTERNAL,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let name = match &cli.command {
        Command::Synth(_) => "synth",
        Command::Annotate(_) => "annotate",
        Command::BuildDataset(_) => "build-dataset",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Simulate(_) => "simulate",
        Command::Evaluate(_) => "evaluate",
        Command::Compare(_) => "compare",
    };
    let mut run = Run::new(name, cli, &config);
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a, &mut run),
        Command::Annotate(a) => cmd_annotate(a, &mut run),
        Command::BuildDataset(a) => cmd_build_dataset(a, &mut run),
        Command::Train(a) => cmd_train(a, &mut run),
        Command::Predict(a) => cmd_predict(a, &mut run),
        Command::Simulate(a) => cmd_simulate(a, &mut run),
        Command::Evaluate(a) => cmd_evaluate(a, &mut run),
        Command::Compare(a) => cmd_compare(a, &mut run),
    };
    if result.is_err() {
        run.cleanup();
    }
    result
}

fn cmd_synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    let mut spec = run.config.synth.clone();
    if let Some(v) = a.count {
        spec.count = v;
    }
    if let Some(v) = a.forks {
        spec.forks_per_benchmark = v;
    }
    if let Some(v) = a.n {
        spec.n = v;
    }
    if let Some(v) = a.noise {
        spec.noise = v;
    }
    if let Some(v) = a.warmup_fluctuation {
        spec.warmup_fluctuation = v;
    }
    if let Some(v) = a.spike_probability {
        spec.spike_probability = v;
    }
    if a.st_min.is_some() || a.st_max.is_some() {
        let (lo, hi) = match spec.st {
            StDistribution::Fixed(s) => (s, s),
            StDistribution::Uniform { lo, hi } => (lo, hi),
        };
        spec.st = StDistribution::Uniform {
            lo: a.st_min.unwrap_or(lo),
            hi: a.st_max.unwrap_or(hi),
        };
    }
    let out = generate_synthetic_corpus(&spec, run.seed)?;
    let corpus = a.out.join("corpus.jsonl");
    run.write(&corpus, |w| io::write_corpus(w, &out.corpus))?;
    run.write(&a.out.join("truth.jsonl"), |w| io::write_annotations(w, &out.annotations))?;
    run.write(&a.out.join("sop.csv"), |w| io::write_sop_config(w, &out.sop))?;
    log::info!("synth: {} series written to {}", out.corpus.len(), a.out.display());
    run.finish(&corpus)
}

fn cmd_annotate(a: &AnnotateArgs, run: &mut Run) -> Result<()> {
    let corpus = io::read_corpus(&run.input(&a.corpus)?)?;
    let batch = annotate_corpus(&corpus, &run.config.steady_state);
    if let Some((id, e)) = batch.errors.first() {
        return Err(Error::InvalidInput(format!(
            "{} of {} series failed to annotate; first: {id}: {e}",
            batch.errors.len(),
            corpus.len()
        )));
    }
    run.write(&a.out, |w| io::write_annotations(w, &batch.annotations))?;
    run.finish(&a.out)
}

fn cmd_build_dataset(a: &BuildDatasetArgs, run: &mut Run) -> Result<()> {
    let corpus = io::read_corpus(&run.input(&a.corpus)?)?;
    let annotations = io::read_annotations(&run.input(&a.annotations)?)?;
    let mut sampling = run.config.sampling.clone();
    if let Some(w) = a.window {
        sampling.window = w;
    }
    if let Some(f) = a.folds {
        sampling.folds = f;
    }
    sampling.seed = seed::derive(run.seed, seed::stages::FOLDS);
    let (dataset, report) = build_dataset(&corpus, &annotations, &sampling)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dataset = assign_folds(dataset, &sampling)?;
    let violations = label_violations(&dataset, &annotations);
    if !violations.is_empty() {
        return Err(Error::Numerical(format!("{} segments contradict their annotation", violations.len())));
    }
    log::info!(
        "dataset: {} segments from {} series ({} without annotation, {} never steady)",
        dataset.len(),
        report.series_used,
        report.missing_annotation.len(),
        report.not_reached.len()
    );
    run.write(&a.out, |w| io::write_segments(w, &dataset.items))?;
    run.write(&a.fold_map, |w| io::write_fold_map(w, &dataset.fold_assignment))?;
    run.finish(&a.out)
}

fn load_dataset(run: &mut Run, dataset: &Path, fold_map: &Path) -> Result<SegmentDataset> {
    let items = io::read_segments(&run.input(dataset)?)?;
    let folds = io::read_fold_map(&run.input(fold_map)?)?;
    let mut ds = SegmentDataset::new(items);
    ds.fold_assignment = folds;
    Ok(ds)
}

fn cmd_train(a: &TrainArgs, run: &mut Run) -> Result<()> {
    let dataset = load_dataset(run, &a.dataset, &a.fold_map)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rocket = run.config.rocket.clone();
    if let Some(k) = a.kernels {
        rocket.kernels = k;
    }
    rocket.seed = seed::derive(run.seed, seed::stages::KERNELS);
    let cv = cross_validate(&dataset, &rocket)?;
    for (fold, model) in cv.models.iter().enumerate() {
        run.write(&FoldModels::model_path(&a.out, fold), |w| model.write_to(w))?;
    }
    let predictions = a.out.join("predictions.csv");
    run.write(&predictions, |w| io::write_csv(w, &cv.predictions))?;
    if let Ok(row) = classification_table("rocket", &cv.predictions) {
        log::info!("held-out balanced accuracy {:?}", row.balanced_accuracy);
    }
    run.finish(&predictions)
}

fn cmd_predict(a: &PredictArgs, run: &mut Run) -> Result<()> {
    let model = RocketModel::load(&run.input(&a.model)?, None)?;
    let items = io::read_segments(&run.input(&a.dataset)?)?;
    let rows = items
        .iter()
        .map(|item| {
            let score = model.score(&item.segment.values)?;
            let source = &item.segment.source;
            Ok(CvPrediction {
                project: source.project.clone(),
                benchmark: source.benchmark.clone(),
                fork: source.fork,
                start: item.segment.start,
                fold: model.held_out_fold.unwrap_or(0),
                truth: item.label,
                predicted: crate::rocket::label_for_score(score),
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write(&a.out, |w| io::write_csv(w, &rows))?;
    run.finish(&a.out)
}

fn cmd_simulate(a: &SimulateArgs, run: &mut Run) -> Result<()> {
    let corpus = io::read_corpus(&run.input(&a.corpus)?)?;
    let mut stop = run.config.stop;
    if let Some(w) = a.window {
        stop.window = w;
    }
    if let Some(c) = a.cap {
        stop.max_warmup_iterations = c;
    }
    let results = match a.method {
        Method::Model => {
            let models = a
                .models
                .as_deref()
                .ok_or_else(|| Error::Usage("--models for method model".into()))?;
            let fold_map = a
                .fold_map
                .as_deref()
                .ok_or_else(|| Error::Usage("--fold-map for method model".into()))?;
            let fold_map = io::read_fold_map(&run.input(fold_map)?)?;
            let bank = FoldModels::load(models, fold_map, stop.window)?;
            for f in 0..bank.models.len() {
                run.input(&FoldModels::model_path(models, f))?;
            }
            run_corpus(
                &corpus,
                |id| bank.classifier_for(id).map(|m| m as &dyn WindowClassifier),
                &stop,
            )?
        }
        Method::Sop => {
            let path = a
                .sop_config
                .as_deref()
                .ok_or_else(|| Error::Usage("--sop-config for method sop".into()))?;
            let sop = io::read_sop_config(&run.input(path)?)?;
            corpus.iter().map(|s| sop_stop(s, &sop)).collect::<Result<Vec<_>>>()?
        }
        Method::Cv | Method::Rciw | Method::Kld => {
            let kind = match a.method {
                Method::Cv => HeuristicKind::Cv,
                Method::Rciw => HeuristicKind::Rciw,
                _ => HeuristicKind::Kld,
            };
            let cfg = run.config.heuristics.config(kind, &stop, run.seed);
            use rayon::prelude::*;
            corpus
                .par_iter()
                .map(|s| heuristic_stop(s, &cfg))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let records: Vec<StopRecord> = corpus.iter().zip(&results).map(|(s, r)| StopRecord::new(&s.id, r)).collect();
    run.write(&a.out, |w| io::write_stop_records(w, &records))?;
    run.finish(&a.out)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn cmd_evaluate(a: &EvaluateArgs, run: &mut Run) -> Result<()> {
    let corpus = io::read_corpus(&run.input(&a.corpus)?)?;
    let annotations = io::read_annotations(&run.input(&a.annotations)?)?;
    let sop = match &a.sop_config {
        Some(p) => Some(io::read_sop_config(&run.input(p)?)?),
        None => None,
    };
    let window = a.window.unwrap_or(run.config.stop.window);
    let mut methods = Vec::new();
    for spec in &a.results {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--results expects name=path, got {spec:?}")))?;
        let records = io::read_stop_records(&run.input(Path::new(path))?)?;
        methods.push(MethodRecords {
            name: name.to_string(),
            records,
            measurement: if name == "sop" {
                MeasurementLen::Sop
            } else {
                MeasurementLen::Window(window)
            },
        });
    }
    let mut cfg = run.config.evaluation;
    cfg.seed = run.seed;
    if let Some(r) = a.resamples {
        cfg.resamples = r;
    }
    if let Some(al) = a.alpha {
        cfg.alpha = al;
    }
    let report = evaluate(&corpus, &annotations, sop.as_ref(), &methods, &cfg)?;
    run.write(&a.out, |w| io::write_csv(w, &report.benchmarks))?;
    run.write(&sibling(&a.out, ".series.csv"), |w| io::write_csv(w, &report.series))?;
    run.finish(&a.out)
}

fn cmd_compare(a: &CompareArgs, run: &mut Run) -> Result<()> {
    let benchmarks: Vec<BenchmarkRow> = io::read_csv(&run.input(&a.report)?)?;
    let series_path = a.series.clone().unwrap_or_else(|| sibling(&a.report, ".series.csv"));
    let series: Vec<SeriesRow> = io::read_csv(&run.input(&series_path)?)?;
    let report = compare_reports(&benchmarks, &series, &a.framework)?;
    run.write(&a.out.join("outcomes.csv"), |w| io::write_csv(w, &report.outcomes))?;
    run.write(&a.out.join("quality_time.csv"), |w| io::write_csv(w, &report.quality_time))?;
    run.write(&a.out.join("wee.csv"), |w| io::write_csv(w, &report.wee))?;
    run.write(&a.out.join("estimation.csv"), |w| io::write_csv(w, &report.estimation))?;
    if let Some(p) = &a.predictions {
        let preds: Vec<CvPrediction> = io::read_csv(&run.input(p)?)?;
        let row = classification_table(&a.framework, &preds)?;
        run.write(&a.out.join("classification.csv"), |w| io::write_csv(w, &[row]))?;
    }
    let summary = a.out.join("summary.txt");
    let text = render_summary(&report, &a.framework);
    run.write(&summary, |w| Ok(w.write_all(text.as_bytes())?))?;
    print!("{text}");
    run.finish(&summary)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

fn render_summary(report: &crate::evaluation::CompareReport, framework: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("framework: {framework}\n\nWEE (paired per series)\n"));
    s.push_str("baseline  pairs  median_fw_s  median_base_s  wilcoxon_p  a12  r\n");
    for r in &report.wee {
        s.push_str(&format!(
            "{}  {}  {}  {}  {}  {}  {}\n",
            r.baseline,
            r.pairs,
            fmt_opt(r.median_wee_framework_s, 2),
            fmt_opt(r.median_wee_baseline_s, 2),
            fmt_opt(r.wilcoxon_p, 4),
            fmt_opt(r.a12, 3),
            fmt_opt(r.rank_biserial, 3)
        ));
    }
    s.push_str("\nquality and time (% of benchmarks)\n");
    s.push_str("baseline  n  improved_q  regressed_q  net_q  improved_t  regressed_t  net_t\n");
    for r in &report.quality_time {
        s.push_str(&format!(
            "{}  {}  {:.1}  {:.1}  {:.1}  {:.1}  {:.1}  {:.1}\n",
            r.baseline,
            r.benchmarks,
            r.improved_quality_pct,
            r.regressed_quality_pct,
            r.net_quality_pct,
            r.improved_time_pct,
            r.regressed_time_pct,
            r.net_time_pct
        ));
    }
    s.push_str("\nestimation (% of series)\nmethod  n  over  under  exact\n");
    for r in &report.estimation {
        s.push_str(&format!(
            "{}  {}  {:.1}  {:.1}  {:.1}\n",
            r.method, r.series, r.overestimate_pct, r.underestimate_pct, r.exact_pct
        ));
    }
    s
}
