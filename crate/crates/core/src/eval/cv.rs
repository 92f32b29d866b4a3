use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
use super::EvalError;
use crate::data::Examples;
use crate::learners::{fit, Hyperparams, LearnerKind};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub runs: usize,
    pub stratified: bool,
    /// Per-run metrics from the run's pooled confusion matrix instead of
    /// the mean of per-fold metrics.
    pub pooled: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            runs: 10,
            stratified: true,
            pooled: false,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.folds < 2 {
            return Err(EvalError::Config("folds must be at least 2".into()));
        }
        if self.runs < 1 {
            return Err(EvalError::Config("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Test-to-train size ratio used by the corrected t-test.
    pub fn test_train_ratio(&self) -> f64 {
        1.0 / (self.folds as f64 - 1.0)
    }
}

/// Fold index per row. Stratified assignment deals each class's shuffled
/// rows round-robin, continuing where the previous class stopped.
pub fn assign_folds<R: Rng>(
    ex: &Examples,
    k: usize,
    stratified: bool,
    rng: &mut R,
) -> Result<Vec<usize>, EvalError> {
    let mut fold = vec![0usize; ex.len()];
    let groups: Vec<Vec<usize>> = if stratified {
        let counts = ex.class_counts();
        for (class, &c) in counts.iter().enumerate() {
            if c < k {
                return Err(EvalError::Stratification {
                    class,
                    rows: c,
                    folds: k,
                });
            }
        }
        (0..2)
            .map(|y| {
                (0..ex.len())
                    .filter(|&i| ex.label(i).index() == y)
                    .collect()
            })
            .collect()
    } else {
        if ex.len() < k {
            return Err(EvalError::Stratification {
                class: 2,
                rows: ex.len(),
                folds: k,
            });
        }
        vec![(0..ex.len()).collect()]
    };
    let mut next = 0;
    for mut g in groups {
        g.shuffle(rng);
        for i in g {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub kind: LearnerKind,
    pub config: CvConfig,
    /// Indexed `[run][fold]`.
    pub folds: Vec<Vec<FoldOutcome>>,
    pub run_means: Vec<MetricsReport<f64>>,
    pub overall: MetricsReport<f64>,
    /// Run with the highest mean F1; ties by accuracy, then earliest.
    pub best_run: usize,
}

impl CvResult {
    pub fn best(&self) -> &MetricsReport<f64> {
        &self.run_means[self.best_run]
    }

    /// Per-(run, fold) F1 in run-major order.
    pub fn f1_scores(&self) -> Vec<f64> {
        self.folds.iter().flatten().map(|f| f.report.f1).collect()
    }
}

/// Fold assignment for `run`; depends only on the seed and run index, so
/// every learner sees the same partitions.
pub fn run_folds(
    ex: &Examples,
    cfg: &CvConfig,
    seed_value: u64,
    run: usize,
) -> Result<Vec<usize>, EvalError> {
    let mut rng = seed::rng_for(seed_value, &format!("cv/folds/{run}"));
    assign_folds(ex, cfg.folds, cfg.stratified, &mut rng)
}

pub fn cross_validate(
    ex: &Examples,
    kind: LearnerKind,
    hp: &Hyperparams,
    cfg: &CvConfig,
    seed_value: u64,
) -> Result<CvResult, EvalError> {
    cross_validate_with(ex, kind, cfg, seed_value, |_, _, _| Ok(hp.clone()))
}

/// Like [`cross_validate`], with hyperparameters chosen per outer fold from
/// that fold's training rows only.
pub fn cross_validate_with<H>(
    ex: &Examples,
    kind: LearnerKind,
    cfg: &CvConfig,
    seed_value: u64,
    hp_for: H,
) -> Result<CvResult, EvalError>
where
    H: Fn(&Examples, usize, usize) -> Result<Hyperparams, EvalError> + Sync,
{
    cfg.validate()?;
    let assignments: Vec<Vec<usize>> = (0..cfg.runs)
        .map(|r| run_folds(ex, cfg, seed_value, r))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.runs)
        .flat_map(|r| (0..cfg.folds).map(move |f| (r, f)))
        .collect();
    let outcomes: Vec<FoldOutcome> = jobs
        .par_iter()
        .map(|&(r, f)| {
            let a = &assignments[r];
            let train_idx: Vec<usize> = (0..ex.len()).filter(|&i| a[i] != f).collect();
            let test_idx: Vec<usize> = (0..ex.len()).filter(|&i| a[i] == f).collect();
            let train = ex.subset(&train_idx);
            let test = ex.subset(&test_idx);
            let hp = hp_for(&train, r, f)?;
            let fit_seed = seed::derive(seed_value, &format!("cv/fit/{kind}/{r}/{f}"));
            let model = fit(kind, &train, &hp, fit_seed)?;
            let pred = model.predict_batch(&test)?;
            let cm = confusion(test.labels(), &pred)?;
            Ok(FoldOutcome {
                confusion: cm,
                report: metrics(&cm)?,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    let folds: Vec<Vec<FoldOutcome>> = outcomes
        .chunks(cfg.folds)
        .map(<[FoldOutcome]>::to_vec)
        .collect();
    let run_means: Vec<MetricsReport<f64>> = folds
        .iter()
        .map(|run| {
            if cfg.pooled {
                let cm = run
                    .iter()
                    .fold(ConfusionMatrix::default(), |a, f| a.merge(&f.confusion));
                metrics(&cm)
            } else {
                let reports: Vec<_> = run.iter().map(|f| f.report).collect();
                Ok(MetricsReport::mean(&reports).expect("folds >= 2"))
            }
        })
        .collect::<Result<_, _>>()?;
    let overall = MetricsReport::mean(&run_means).expect("runs >= 1");
    let mut best_run = 0;
    for (i, m) in run_means.iter().enumerate().skip(1) {
        let b = &run_means[best_run];
        if m.f1 > b.f1 || (m.f1 == b.f1 && m.accuracy > b.accuracy) {
            best_run = i;
        }
    }
    Ok(CvResult {
        kind,
        config: cfg.clone(),
        folds,
        run_means,
        overall,
        best_run,
    })
}

/// Row indices of a class-stratified sample of about `fraction` of `ex`,
/// in dataset order. Each class keeps at least `min_per_class` rows when
/// it has that many.
pub fn stratified_subsample<R: Rng>(
    ex: &Examples,
    fraction: f64,
    min_per_class: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut keep = Vec::new();
    for y in 0..2 {
        let mut idx: Vec<usize> = (0..ex.len())
            .filter(|&i| ex.label(i).index() == y)
            .collect();
        let want = ((idx.len() as f64 * fraction).round() as usize)
            .max(min_per_class)
            .min(idx.len());
        idx.shuffle(rng);
        keep.extend_from_slice(&idx[..want]);
    }
    keep.sort_unstable();
    keep
}

/// Mean F1 of a single `folds`-fold CV, or NaN when it cannot be computed.
pub fn inner_cv_f1(
    ex: &Examples,
    kind: LearnerKind,
    hp: &Hyperparams,
    folds: usize,
    seed_value: u64,
) -> f64 {
    let cfg = CvConfig {
        folds,
        runs: 1,
        ..CvConfig::default()
    };
    cross_validate(ex, kind, hp, &cfg, seed_value).map_or(f64::NAN, |r| r.overall.f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSpec, Label};

    fn toy(n: usize, absent_every: usize) -> Examples {
        let schema = vec![FeatureSpec::binary("a")];
        let rows: Vec<[u16; 1]> = (0..n).map(|i| [u16::from(i % absent_every == 0)]).collect();
        let labels: Vec<Label> = rows.iter().map(|r| Label::from_absent(r[0] == 1)).collect();
        Examples::from_rows(schema, &rows, &labels).unwrap()
    }

    #[test]
    fn stratified_fold_sizes() {
        let ex = toy(103, 4);
        let mut rng = seed::rng(1);
        let a = assign_folds(&ex, 10, true, &mut rng).unwrap();
        for y in 0..2 {
            let sizes: Vec<usize> = (0..10)
                .map(|f| {
                    (0..ex.len())
                        .filter(|&i| a[i] == f && ex.label(i).index() == y)
                        .count()
                })
                .collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn too_few_rows_per_class() {
        let ex = toy(40, 10);
        let mut rng = seed::rng(1);
        assert!(matches!(
            assign_folds(&ex, 10, true, &mut rng),
            Err(EvalError::Stratification {
                class: 1,
                rows: 4,
                ..
            })
        ));
        assert!(assign_folds(&ex, 10, false, &mut rng).is_ok());
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let ex = toy(200, 3);
        let cfg = CvConfig {
            runs: 2,
            ..CvConfig::default()
        };
        let r = cross_validate(&ex, LearnerKind::C45, &Hyperparams::new(), &cfg, 5).unwrap();
        assert!(r.folds.iter().flatten().all(|f| f.report.accuracy == 1.0));
        let again = cross_validate(&ex, LearnerKind::C45, &Hyperparams::new(), &cfg, 5).unwrap();
        assert_eq!(r, again);
    }
}
