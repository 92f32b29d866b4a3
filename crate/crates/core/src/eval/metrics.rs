use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::Label;
use crate::scalar::Real;

/// Binary confusion counts with `Absent` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, truth: Label, pred: Label) {
        match (truth, pred) {
            (Label::Absent, Label::Absent) => self.tp += 1,
            (Label::Present, Label::Present) => self.tn += 1,
            (Label::Present, Label::Absent) => self.fp += 1,
            (Label::Absent, Label::Present) => self.fn_ += 1,
        }
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

pub fn confusion(truth: &[Label], pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::Length {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        cm.record(t, p);
    }
    Ok(cm)
}

/// Accuracy, precision, recall and F1. A ratio with a zero denominator is
/// reported as 0 and flagged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real + Serialize + serde::de::DeserializeOwned")]
pub struct MetricsReport<F> {
    pub accuracy: F,
    pub precision: F,
    pub recall: F,
    pub f1: F,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub f1_degenerate: bool,
}

fn ratio<F: Real>(num: u64, den: u64) -> (F, bool) {
    if den == 0 {
        (F::zero(), true)
    } else {
        (F::lit(num as f64) / F::lit(den as f64), false)
    }
}

pub fn metrics<F: Real>(cm: &ConfusionMatrix) -> Result<MetricsReport<F>, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::Empty);
    }
    let (accuracy, _) = ratio(cm.tp + cm.tn, cm.total());
    let (precision, pd) = ratio::<F>(cm.tp, cm.tp + cm.fp);
    let (recall, rd) = ratio::<F>(cm.tp, cm.tp + cm.fn_);
    let sum = precision + recall;
    let (f1, fd) = if pd || rd || sum == F::zero() {
        (F::zero(), true)
    } else {
        (F::lit(2.0) * precision * recall / sum, false)
    };
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        precision_degenerate: pd,
        recall_degenerate: rd,
        f1_degenerate: fd,
    })
}

impl<F: Real> MetricsReport<F> {
    /// Componentwise mean; a flag is set if any input had it.
    pub fn mean(reports: &[MetricsReport<F>]) -> Option<MetricsReport<F>> {
        if reports.is_empty() {
            return None;
        }
        let n = F::from_usize_lossy(reports.len());
        let avg = |g: fn(&MetricsReport<F>) -> F| reports.iter().map(g).sum::<F>() / n;
        Some(MetricsReport {
            accuracy: avg(|r| r.accuracy),
            precision: avg(|r| r.precision),
            recall: avg(|r| r.recall),
            f1: avg(|r| r.f1),
            precision_degenerate: reports.iter().any(|r| r.precision_degenerate),
            recall_degenerate: reports.iter().any(|r| r.recall_degenerate),
            f1_degenerate: reports.iter().any(|r| r.f1_degenerate),
        })
    }

    pub fn values(&self) -> [F; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}
