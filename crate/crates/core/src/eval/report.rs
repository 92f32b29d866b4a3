use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, cross_validate_with, CvConfig, CvResult};
use super::metrics::MetricsReport;
use super::ttest::paired_ttest;
use super::EvalError;
use crate::data::Examples;
use crate::learners::{Hyperparams, LearnerKind};

pub const METRICS_CSV_HEADER: &str = "learner,stat,accuracy,precision,recall,f1";
pub const TTEST_CSV_HEADER: &str = "baseline,challenger,t,p,significant";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub kind: LearnerKind,
    pub hyperparams: Hyperparams,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub baseline: LearnerKind,
    pub challenger: LearnerKind,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub alpha: f64,
    pub corrected: bool,
    pub learners: Vec<LearnerSummary>,
    /// Learner with the best average F1; earliest wins ties.
    pub baseline: Option<LearnerKind>,
    pub ttests: Vec<TTestRow>,
}

/// Per-fold hyperparameter choice: `(kind, training rows, run, fold)`.
pub type FoldTuner<'a> =
    dyn Fn(LearnerKind, &Examples, usize, usize) -> Result<Hyperparams, EvalError> + Sync + 'a;

/// Cross-validates every learner on shared fold assignments and tests each
/// against the best-average-F1 baseline.
pub fn benchmark(
    ex: &Examples,
    entries: &[(LearnerKind, Hyperparams)],
    cfg: &CvConfig,
    alpha: f64,
    corrected: bool,
    seed_value: u64,
) -> Result<BenchmarkReport, EvalError> {
    benchmark_with(ex, entries, cfg, alpha, corrected, seed_value, None)
}

/// Like [`benchmark`]; when `tuner` is given it picks hyperparameters
/// inside every outer training fold and `entries` only name the learners.
pub fn benchmark_with(
    ex: &Examples,
    entries: &[(LearnerKind, Hyperparams)],
    cfg: &CvConfig,
    alpha: f64,
    corrected: bool,
    seed_value: u64,
    tuner: Option<&FoldTuner<'_>>,
) -> Result<BenchmarkReport, EvalError> {
    if entries.is_empty() {
        return Err(EvalError::Config(
            "benchmark needs at least one learner".into(),
        ));
    }
    let mut learners = Vec::with_capacity(entries.len());
    for (kind, hp) in entries {
        let cv = match tuner {
            Some(t) => cross_validate_with(ex, *kind, cfg, seed_value, |train, r, f| {
                t(*kind, train, r, f)
            })?,
            None => cross_validate(ex, *kind, hp, cfg, seed_value)?,
        };
        learners.push(LearnerSummary {
            kind: *kind,
            hyperparams: hp.clone(),
            cv,
        });
    }
    let mut base = 0;
    for (i, l) in learners.iter().enumerate() {
        if l.cv.overall.f1 > learners[base].cv.overall.f1 {
            base = i;
        }
    }
    let ratio = corrected.then(|| cfg.test_train_ratio());
    let baseline_scores = learners[base].cv.f1_scores();
    let mut ttests = Vec::new();
    for (i, l) in learners.iter().enumerate() {
        if i == base {
            continue;
        }
        let t = paired_ttest(&baseline_scores, &l.cv.f1_scores(), alpha, ratio)?;
        ttests.push(TTestRow {
            baseline: learners[base].kind,
            challenger: l.kind,
            t: t.t,
            p: t.p,
            significant: t.significant,
            degenerate: t.degenerate,
        });
    }
    Ok(BenchmarkReport {
        alpha,
        corrected,
        baseline: Some(learners[base].kind),
        learners,
        ttests,
    })
}

fn csv_row(
    w: &mut impl Write,
    name: &str,
    stat: &str,
    m: &MetricsReport<f64>,
) -> std::io::Result<()> {
    writeln!(
        w,
        "{name},{stat},{},{},{},{}",
        m.accuracy, m.precision, m.recall, m.f1
    )
}

impl BenchmarkReport {
    pub fn summary(&self, kind: LearnerKind) -> Option<&LearnerSummary> {
        self.learners.iter().find(|l| l.kind == kind)
    }

    pub fn ttest(&self, challenger: LearnerKind) -> Option<&TTestRow> {
        self.ttests.iter().find(|t| t.challenger == challenger)
    }

    pub fn write_metrics_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{METRICS_CSV_HEADER}")?;
        for stat in ["best", "average"] {
            for l in &self.learners {
                let m = if stat == "best" {
                    l.cv.best()
                } else {
                    &l.cv.overall
                };
                csv_row(&mut w, l.kind.name(), stat, m)?;
            }
        }
        Ok(())
    }

    pub fn write_ttest_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TTEST_CSV_HEADER}")?;
        for t in &self.ttests {
            writeln!(
                w,
                "{},{},{},{},{}",
                t.baseline, t.challenger, t.t, t.p, t.significant
            )?;
        }
        Ok(())
    }

    /// Best-run and average tables plus the t-test table, as aligned text.
    pub fn text_tables(&self) -> String {
        let mut s = String::new();
        let width = self
            .learners
            .iter()
            .map(|l| l.kind.name().len())
            .max()
            .unwrap_or(7)
            .max(10);
        for (title, best) in [("Best run", true), ("Average", false)] {
            let _ = writeln!(s, "{title}");
            let _ = writeln!(
                s,
                "{:<width$}  {:>8}  {:>9}  {:>8}  {:>8}",
                "classifier", "accuracy", "precision", "recall", "f1"
            );
            for l in &self.learners {
                let m = if best { l.cv.best() } else { &l.cv.overall };
                let _ = writeln!(
                    s,
                    "{:<width$}  {:>8.4}  {:>9.4}  {:>8.4}  {:>8.4}",
                    l.kind.name(),
                    m.accuracy,
                    m.precision,
                    m.recall,
                    m.f1
                );
            }
            s.push('\n');
        }
        if !self.ttests.is_empty() {
            let kind = if self.corrected {
                "corrected paired t-test"
            } else {
                "paired t-test"
            };
            let _ = writeln!(
                s,
                "F1 {kind} vs {}, alpha {}",
                self.ttests[0].baseline, self.alpha
            );
            let _ = writeln!(
                s,
                "{:<width$}  {:>9}  {:>9}  significant",
                "challenger", "t", "p"
            );
            for t in &self.ttests {
                let _ = writeln!(
                    s,
                    "{:<width$}  {:>9.4}  {:>9.3e}  {}",
                    t.challenger.name(),
                    t.t,
                    t.p,
                    if t.significant { "yes" } else { "no" }
                );
            }
        }
        s
    }
}
