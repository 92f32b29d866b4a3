use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dataset::AnnotationConfig;
use crate::eval::CvConfig;
use crate::ingest::{check_window, DEFAULT_THRESHOLD_WATTS, DEFAULT_WINDOW_MINUTES};
use crate::learners::{params_for, Hyperparams, LearnerKind};
use crate::tuning::{DomainSpec, QgaConfig, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Generated household traces.
    Synth { start: NaiveDate, days: i64 },
    /// A UK-DALE house directory with `labels.dat` and `channel_N.dat`.
    Ukdale {
        dir: PathBuf,
        /// Explicit appliance-to-channel numbers; otherwise read from labels.
        #[serde(default)]
        channels: BTreeMap<String, u32>,
    },
}

impl Default for Source {
    fn default() -> Self {
        Source::Synth {
            start: NaiveDate::from_ymd_opt(2013, 1, 7).expect("valid date"),
            days: 56,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    pub qga: QgaConfig,
    pub random_search_n: usize,
    pub inner_folds: usize,
    /// Fraction of the dataset used for standalone tuning fitness.
    pub sample_fraction: f64,
    /// Tune inside every outer training fold during benchmarking.
    pub nested: bool,
    /// Per-learner overrides of the built-in search spaces.
    pub spaces: BTreeMap<LearnerKind, BTreeMap<String, DomainSpec>>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            qga: QgaConfig::default(),
            random_search_n: 60,
            inner_folds: 3,
            sample_fraction: 0.1,
            nested: false,
            spaces: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub learners: Vec<LearnerKind>,
    pub cv: CvConfig,
    pub alpha: f64,
    /// Corrected resampled t-test; `false` gives the plain paired test.
    pub corrected: bool,
    /// Fraction of rows kept (stratified) before benchmarking.
    pub subsample: f64,
    /// Fixed hyperparameters; a tuned file in the output directory wins.
    pub hyperparams: BTreeMap<LearnerKind, Hyperparams>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            learners: LearnerKind::ALL.to_vec(),
            cv: CvConfig::default(),
            alpha: 0.05,
            corrected: true,
            subsample: 1.0,
            hyperparams: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub out: PathBuf,
    pub timezone: String,
    pub window_minutes: u32,
    pub threshold_watts: f64,
    pub source: Source,
    pub annotation: AnnotationConfig,
    pub tuning: TuningConfig,
    pub benchmark: BenchmarkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            workers: 0,
            out: PathBuf::from("out"),
            timezone: "Europe/London".into(),
            window_minutes: DEFAULT_WINDOW_MINUTES,
            threshold_watts: DEFAULT_THRESHOLD_WATTS,
            source: Source::default(),
            annotation: AnnotationConfig::default(),
            tuning: TuningConfig::default(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub runs: Option<usize>,
    pub folds: Option<usize>,
    pub subsample: Option<f64>,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, PipelineError> {
    Err(PipelineError::Config(msg.into()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(r) = o.runs {
            self.benchmark.cv.runs = r;
        }
        if let Some(f) = o.folds {
            self.benchmark.cv.folds = f;
        }
        if let Some(s) = o.subsample {
            self.benchmark.subsample = s;
        }
    }

    pub fn tz(&self) -> Result<Tz, PipelineError> {
        self.timezone
            .parse::<Tz>()
            .map_err(|_| PipelineError::Config(format!("unknown timezone `{}`", self.timezone)))
    }

    /// Search space for `kind`, from the config or built in.
    pub fn space(&self, kind: LearnerKind) -> Result<SearchSpace, PipelineError> {
        match self.tuning.spaces.get(&kind) {
            Some(specs) => SearchSpace::from_specs(specs)
                .map_err(|e| PipelineError::Config(format!("{kind}: {e}"))),
            None => Ok(SearchSpace::default_for(kind)),
        }
    }

    /// Checks every setting without touching the filesystem.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.tz()?;
        check_window(self.window_minutes).map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(self.threshold_watts.is_finite() && self.threshold_watts > 0.0) {
            return config_err("threshold_watts must be positive");
        }
        match &self.source {
            Source::Synth { days, .. } if *days < 1 => {
                return config_err("synth days must be at least 1")
            }
            Source::Ukdale { channels, .. } => {
                for name in channels.keys() {
                    if crate::Appliance::from_name(name).is_none() {
                        return config_err(format!(
                            "unknown appliance `{name}` in source.channels"
                        ));
                    }
                }
            }
            _ => {}
        }
        self.annotation
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.tuning
            .qga
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.tuning.random_search_n == 0 {
            return config_err("tuning.random_search_n must be at least 1");
        }
        if self.tuning.inner_folds < 2 {
            return config_err("tuning.inner_folds must be at least 2");
        }
        if !(self.tuning.sample_fraction > 0.0 && self.tuning.sample_fraction <= 1.0) {
            return config_err("tuning.sample_fraction must lie in (0, 1]");
        }
        for kind in LearnerKind::ALL {
            self.space(kind)?;
        }
        let b = &self.benchmark;
        if b.learners.is_empty() {
            return config_err("benchmark.learners is empty");
        }
        b.cv.validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&b.alpha) {
            return config_err("benchmark.alpha must lie in [0, 1]");
        }
        if !(b.subsample > 0.0 && b.subsample <= 1.0) {
            return config_err("benchmark.subsample must lie in (0, 1]");
        }
        for (kind, hp) in &b.hyperparams {
            params_for(*kind, hp).map_err(|e| PipelineError::Config(format!("{kind}: {e}")))?;
        }
        Ok(())
    }
}
