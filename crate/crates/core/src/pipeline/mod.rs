//! End-to-end commands behind one [`RunConfig`]: ingest, annotate, tune,
//! benchmark and report. Every command validates its configuration and
//! inputs and computes its results in memory before writing any file.

pub mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    align_channels, annotate, build_dataset, read_dataset_csv, write_dataset_csv,
    write_histogram_csv, Annotation, AnnotationError, BinarizedGrid, DatasetError, LabeledDataset,
    OutingKind,
};
use crate::eval::{benchmark_with, inner_cv_f1, stratified_subsample, BenchmarkReport, EvalError};
use crate::ingest::{
    parse_labels, read_resampled_csv, synth_household_resampled, write_resampled_csv,
    ChannelReader, IngestError, ResampledSeries, Resampler,
};
use crate::learners::{Hyperparams, LearnerError, LearnerKind};
use crate::tuning::{qga_tune, random_search, Method, TuneError, TuneResult};
use crate::{seed, Appliance, Examples};
pub use config::{BenchmarkConfig, Overrides, RunConfig, Source, TuningConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{what} not found at {}; {hint}", path.display())]
    Missing {
        what: String,
        path: PathBuf,
        hint: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Ingest { path: PathBuf, source: IngestError },
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: DatasetError },
    #[error(transparent)]
    Grid(#[from] DatasetError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// 2 for usage and configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn resampled(&self, a: Appliance) -> PathBuf {
        self.root
            .join("resampled")
            .join(format!("{}.csv", a.name()))
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn histogram(&self) -> PathBuf {
        self.root.join("weekday_histogram.csv")
    }

    pub fn tune_log(&self, kind: LearnerKind, method: Method) -> PathBuf {
        self.root
            .join("tune")
            .join(format!("{}_{}_log.csv", kind.name(), method.name()))
    }

    pub fn tuned(&self, kind: LearnerKind) -> PathBuf {
        self.root
            .join("tune")
            .join(format!("{}_best.json", kind.name()))
    }

    pub fn metrics_csv(&self) -> PathBuf {
        self.root.join("benchmark").join("metrics.csv")
    }

    pub fn ttest_csv(&self) -> PathBuf {
        self.root.join("benchmark").join("ttests.csv")
    }

    pub fn tables(&self) -> PathBuf {
        self.root.join("benchmark").join("tables.txt")
    }

    pub fn benchmark_json(&self) -> PathBuf {
        self.root.join("benchmark").join("report.json")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.txt")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes every `(path, bytes)` pair, creating parent directories.
fn write_all(files: Vec<(PathBuf, Vec<u8>)>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let f = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(f);
        w.write_all(&bytes)
            .and_then(|_| w.flush())
            .map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn open(path: &Path, what: &str, hint: &str) -> Result<BufReader<File>> {
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: what.into(),
            path: path.to_path_buf(),
            hint: hint.into(),
        });
    }
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

/// Runs `f` on a pool of `workers` threads (all cores when 0).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// `(appliance, channel file)` for the four appliances of a UK-DALE house.
pub fn ukdale_channel_files(
    dir: &Path,
    explicit: &std::collections::BTreeMap<String, u32>,
) -> Result<Vec<(Appliance, PathBuf)>> {
    let labels_path = dir.join("labels.dat");
    let labels = parse_labels(open(
        &labels_path,
        "UK-DALE labels file",
        "point source.dir at a house directory such as ukdale/house_1",
    )?)
    .map_err(|source| PipelineError::Ingest {
        path: labels_path.clone(),
        source,
    })?;
    let mut out = Vec::with_capacity(4);
    for a in Appliance::ALL {
        let channel = match explicit.get(a.name()) {
            Some(&c) => Some(c),
            None => labels
                .iter()
                .find(|(_, name)| Appliance::from_channel_label(name) == Some(a))
                .map(|(&c, _)| c),
        };
        let Some(channel) = channel else {
            return Err(PipelineError::Usage(format!(
                "{} lists no `{}` channel; set source.channels.{} to its channel number",
                labels_path.display(),
                a.name(),
                a.name()
            )));
        };
        let path = dir.join(format!("channel_{channel}.dat"));
        if !path.exists() {
            return Err(PipelineError::Missing {
                what: format!("{} channel file", a.name()),
                path,
                hint: "download the UK-DALE house directory including its channel files".into(),
            });
        }
        out.push((a, path));
    }
    Ok(out)
}

fn resample_file(a: Appliance, path: &Path, window: u32, tz: Tz) -> Result<ResampledSeries> {
    let ctx = |source| PipelineError::Ingest {
        path: path.to_path_buf(),
        source,
    };
    let reader = File::open(path).map(BufReader::new).map_err(io_err(path))?;
    let mut r = Resampler::new(a.name(), window, tz).map_err(ctx)?;
    for sample in ChannelReader::new(reader) {
        r.push(sample.map_err(ctx)?).map_err(ctx)?;
    }
    r.finish().map_err(ctx)
}

/// Resampled channels for the configured source, before writing.
pub fn load_source(cfg: &RunConfig) -> Result<Vec<ResampledSeries>> {
    let tz = cfg.tz()?;
    match &cfg.source {
        Source::Synth { start, days } => synth_household_resampled(
            *start,
            *days,
            seed::derive(cfg.seed, "synth"),
            tz,
            cfg.window_minutes,
        )
        .map_err(|source| PipelineError::Ingest {
            path: PathBuf::from("<synth>"),
            source,
        }),
        Source::Ukdale { dir, channels } => {
            let files = ukdale_channel_files(dir, channels)?;
            let series = files
                .par_iter()
                .map(|(a, p)| resample_file(*a, p, cfg.window_minutes, tz))
                .collect::<Result<Vec<_>>>()?;
            Ok(align_channels(&series)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub files: Vec<PathBuf>,
    pub windows: usize,
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let series = load_source(cfg)?;
    let mut files = Vec::new();
    for s in &series {
        let a = Appliance::from_name(&s.appliance).expect("source yields known appliances");
        let mut buf = Vec::new();
        write_resampled_csv(s, &mut buf).map_err(io_err(&layout.resampled(a)))?;
        files.push((layout.resampled(a), buf));
    }
    let windows = series.first().map_or(0, |s| s.values.len());
    Ok(IngestSummary {
        files: write_all(files)?,
        windows,
    })
}

fn read_channels(cfg: &RunConfig) -> Result<Vec<ResampledSeries>> {
    let layout = Layout::new(&cfg.out);
    Appliance::ALL
        .iter()
        .map(|&a| {
            let path = layout.resampled(a);
            let r = open(&path, "resampled channel", "run `absence ingest` first")?;
            read_resampled_csv(r, cfg.window_minutes)
                .map_err(|source| PipelineError::Ingest { path, source })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateSummary {
    pub rows: usize,
    pub absent: usize,
    pub outings: Vec<(OutingKind, usize)>,
}

/// Labeled dataset and its annotation for the ingested channels.
pub fn build_labeled(cfg: &RunConfig) -> Result<(LabeledDataset, Annotation)> {
    let tz = cfg.tz()?;
    let channels = read_channels(cfg)?;
    let grid = BinarizedGrid::from_channels(&channels, cfg.threshold_watts, tz)?;
    let ann = annotate(&grid, &cfg.annotation, seed::derive(cfg.seed, "annotate"))?;
    Ok((build_dataset(&grid, &ann), ann))
}

pub fn cmd_annotate(cfg: &RunConfig) -> Result<AnnotateSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let (ds, ann) = build_labeled(cfg)?;
    let manifest = ann.manifest_json(&cfg.tz()?);
    let mut data = Vec::new();
    write_dataset_csv(&ds, &mut data).map_err(io_err(&layout.dataset()))?;
    let mut hist = Vec::new();
    write_histogram_csv(&ds, &mut hist).map_err(io_err(&layout.histogram()))?;
    write_all(vec![
        (layout.dataset(), data),
        (layout.manifest(), manifest.into_bytes()),
        (layout.histogram(), hist),
    ])?;
    let outings = OutingKind::ALL.map(|k| (k, ann.count(k))).to_vec();
    let [_, absent] = ds.label_counts();
    Ok(AnnotateSummary {
        rows: ds.rows.len(),
        absent,
        outings,
    })
}

pub fn load_examples(cfg: &RunConfig) -> Result<Examples> {
    let path = Layout::new(&cfg.out).dataset();
    let r = open(&path, "labeled dataset", "run `absence annotate` first")?;
    let ds = read_dataset_csv(r, cfg.window_minutes)
        .map_err(|source| PipelineError::Dataset { path, source })?;
    if ds.rows.is_empty() {
        return Err(PipelineError::Usage("the labeled dataset is empty".into()));
    }
    Ok(ds.to_examples())
}

/// Tuned hyperparameters as stored in `tune/<learner>_best.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedParams {
    pub learner: LearnerKind,
    pub method: Method,
    pub fitness: f64,
    pub hyperparams: Hyperparams,
}

/// Randomized search for the deep network, QGA for the rest.
pub fn method_for(kind: LearnerKind) -> Method {
    if kind == LearnerKind::DeepNet {
        Method::RandomSearch
    } else {
        Method::Qga
    }
}

/// Tunes `kind` on `train`; fitness is mean F1 of an inner stratified CV.
pub fn tune_on(
    cfg: &RunConfig,
    kind: LearnerKind,
    train: &Examples,
    purpose: &str,
) -> Result<TuneResult> {
    let space = cfg.space(kind)?;
    let t = &cfg.tuning;
    let fitness_seed = seed::derive(cfg.seed, &format!("{purpose}/fitness/{kind}"));
    let fitness = |hp: &Hyperparams| inner_cv_f1(train, kind, hp, t.inner_folds, fitness_seed);
    let tuner_seed = seed::derive(cfg.seed, &format!("{purpose}/search/{kind}"));
    Ok(match method_for(kind) {
        Method::Qga => qga_tune(&space, fitness, &t.qga, tuner_seed)?,
        Method::RandomSearch => random_search(&space, fitness, t.random_search_n, tuner_seed)?,
    })
}

fn tuning_sample(cfg: &RunConfig, ex: &Examples, kind: LearnerKind) -> Examples {
    if cfg.tuning.sample_fraction >= 1.0 {
        return ex.clone();
    }
    let mut rng = seed::rng_for(cfg.seed, &format!("tune/sample/{kind}"));
    ex.subset(&stratified_subsample(
        ex,
        cfg.tuning.sample_fraction,
        cfg.tuning.inner_folds,
        &mut rng,
    ))
}

pub fn parse_learner(name: &str) -> Result<LearnerKind> {
    name.parse()
        .map_err(|e: LearnerError| PipelineError::Usage(e.to_string()))
}

pub fn cmd_tune(cfg: &RunConfig, kind: LearnerKind) -> Result<TunedParams> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let ex = load_examples(cfg)?;
    let sample = tuning_sample(cfg, &ex, kind);
    let result = tune_on(cfg, kind, &sample, "tune")?;
    let tuned = TunedParams {
        learner: kind,
        method: result.method,
        fitness: result.best_fitness,
        hyperparams: result.best.clone(),
    };
    let mut log = Vec::new();
    result
        .write_log_csv(&mut log)
        .map_err(io_err(&layout.tune_log(kind, result.method)))?;
    let best = serde_json::to_string_pretty(&tuned).expect("tuned params serialize") + "\n";
    write_all(vec![
        (layout.tune_log(kind, result.method), log),
        (layout.tuned(kind), best.into_bytes()),
    ])?;
    Ok(tuned)
}

/// Hyperparameters for a benchmark entry: the tuned file, then the config,
/// then learner defaults.
pub fn benchmark_hyperparams(cfg: &RunConfig, kind: LearnerKind) -> Result<Hyperparams> {
    let path = Layout::new(&cfg.out).tuned(kind);
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let t: TunedParams = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if t.learner != kind {
            return Err(PipelineError::Config(format!(
                "{} holds parameters for {}",
                path.display(),
                t.learner
            )));
        }
        crate::learners::params_for(kind, &t.hyperparams)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        return Ok(t.hyperparams);
    }
    Ok(cfg
        .benchmark
        .hyperparams
        .get(&kind)
        .cloned()
        .unwrap_or_default())
}

/// Dataset rows used for benchmarking after optional subsampling.
pub fn benchmark_examples(cfg: &RunConfig) -> Result<Examples> {
    let ex = load_examples(cfg)?;
    let b = &cfg.benchmark;
    if b.subsample >= 1.0 {
        return Ok(ex);
    }
    let mut rng = seed::rng_for(cfg.seed, "benchmark/subsample");
    Ok(ex.subset(&stratified_subsample(
        &ex,
        b.subsample,
        b.cv.folds,
        &mut rng,
    )))
}

pub fn cmd_benchmark(cfg: &RunConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let b = &cfg.benchmark;
    let entries = b
        .learners
        .iter()
        .map(|&k| Ok((k, benchmark_hyperparams(cfg, k)?)))
        .collect::<Result<Vec<_>>>()?;
    let ex = benchmark_examples(cfg)?;
    let seed_value = seed::derive(cfg.seed, "benchmark");
    let nested = |kind: LearnerKind, train: &Examples, run: usize, fold: usize| {
        tune_on(cfg, kind, train, &format!("nested/{run}/{fold}"))
            .map(|r| r.best)
            .map_err(|e| EvalError::Config(e.to_string()))
    };
    let tuner: Option<&crate::eval::FoldTuner<'_>> = if cfg.tuning.nested {
        Some(&nested)
    } else {
        None
    };
    let report = benchmark_with(
        &ex,
        &entries,
        &b.cv,
        b.alpha,
        b.corrected,
        seed_value,
        tuner,
    )?;
    let mut metrics = Vec::new();
    report
        .write_metrics_csv(&mut metrics)
        .map_err(io_err(&layout.metrics_csv()))?;
    let mut ttests = Vec::new();
    report
        .write_ttest_csv(&mut ttests)
        .map_err(io_err(&layout.ttest_csv()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_all(vec![
        (layout.metrics_csv(), metrics),
        (layout.ttest_csv(), ttests),
        (layout.tables(), report.text_tables().into_bytes()),
        (layout.benchmark_json(), json.into_bytes()),
    ])?;
    Ok(report)
}

/// Plain-text summary of whatever artifacts exist under the output
/// directory; also written to `report.txt`.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let mut s = String::new();
    let ex = load_examples(cfg)?;
    let [present, absent] = ex.class_counts();
    s.push_str(&format!(
        "dataset: {} rows, {absent} absent, {present} present\n",
        ex.len()
    ));
    if let Ok(h) = fs::read_to_string(layout.histogram()) {
        s.push_str("\nabsent rows by weekday\n");
        for line in h.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() == 4 {
                s.push_str(&format!("{:<10} {:>7} / {}\n", f[1], f[2], f[3]));
            }
        }
    }
    let mut tuned = Vec::new();
    for kind in LearnerKind::ALL {
        if let Ok(text) = fs::read_to_string(layout.tuned(kind)) {
            if let Ok(t) = serde_json::from_str::<TunedParams>(&text) {
                tuned.push(format!(
                    "{:<15} {:<14} {:.4}  {}\n",
                    kind.name(),
                    t.method.name(),
                    t.fitness,
                    t.hyperparams
                ));
            }
        }
    }
    if !tuned.is_empty() {
        s.push_str("\ntuned hyperparameters (inner-CV F1)\n");
        tuned.iter().for_each(|l| s.push_str(l));
    }
    if let Ok(t) = fs::read_to_string(layout.tables()) {
        s.push('\n');
        s.push_str(&t);
    }
    write_all(vec![(layout.report(), s.clone().into_bytes())])?;
    Ok(s)
}

/// Ingest, annotate, tune every benchmarked learner, benchmark and report.
pub fn run_all(cfg: &RunConfig) -> Result<String> {
    cmd_ingest(cfg)?;
    cmd_annotate(cfg)?;
    for &kind in &cfg.benchmark.learners {
        cmd_tune(cfg, kind)?;
    }
    cmd_benchmark(cfg)?;
    cmd_report(cfg)
}
