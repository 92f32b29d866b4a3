mod common;

use absence_core::dataset::feature_schema;
use absence_core::eval::{
    assign_folds, benchmark, confusion, cross_validate, metrics, paired_ttest, CvConfig,
    MetricsReport,
};
use absence_core::learners::{Hyperparams, LearnerKind};
use absence_core::{Examples, Label};
use common::*;
use proptest::prelude::*;
use rand::Rng;

/// Two-sided 5% critical value of Student's t with 99 degrees of freedom.
const T_CRIT_99: f64 = 1.9842169515086827;

fn label_vec() -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
    (1usize..=1000).prop_flat_map(|n| {
        (
            proptest::collection::vec(any::<bool>().prop_map(Label::from_absent), n),
            proptest::collection::vec(any::<bool>().prop_map(Label::from_absent), n),
        )
    })
}

proptest! {
    #[test]
    fn metrics_match_brute_force((truth, pred) in label_vec()) {
        let cm = confusion(&truth, &pred).unwrap();
        let count = |t: Label, p: Label| truth.iter().zip(&pred).filter(|(a, b)| **a == t && **b == p).count() as u64;
        prop_assert_eq!(cm.tp, count(Label::Absent, Label::Absent));
        prop_assert_eq!(cm.tn, count(Label::Present, Label::Present));
        prop_assert_eq!(cm.fp, count(Label::Present, Label::Absent));
        prop_assert_eq!(cm.fn_, count(Label::Absent, Label::Present));
        let m: MetricsReport<f64> = metrics(&cm).unwrap();
        let n = truth.len() as f64;
        prop_assert_eq!(m.accuracy, (cm.tp + cm.tn) as f64 / n);
        if !m.f1_degenerate {
            prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_partition_rows(seed in any::<u64>(), n in 40usize..400, k in 2usize..11) {
        let mut g = rng(seed);
        let rows = random_rows(n, &mut g);
        let mut labels: Vec<Label> = (0..n).map(|_| Label::from_absent(g.gen_bool(0.3))).collect();
        for l in labels.iter_mut().take(k) { *l = Label::Absent; }
        for l in labels.iter_mut().skip(k).take(k) { *l = Label::Present; }
        let ex = Examples::from_rows(feature_schema(30), &rows, &labels).unwrap();
        let a = assign_folds(&ex, k, true, &mut g).unwrap();
        prop_assert!(a.iter().all(|&f| f < k));
        let counts = ex.class_counts();
        for f in 0..k {
            let size = a.iter().filter(|&&x| x == f).count() as f64;
            for y in 0..2 {
                let in_fold = (0..n).filter(|&i| a[i] == f && ex.label(i).index() == y).count() as f64;
                let expected = size * counts[y] as f64 / n as f64;
                prop_assert!((in_fold - expected).abs() <= 1.0 + 1e-9, "fold {} class {}: {} vs {}", f, y, in_fold, expected);
            }
        }
    }

    #[test]
    fn t_statistic_is_antisymmetric(a in proptest::collection::vec(0.0f64..1.0, 2..60), seed in any::<u64>()) {
        let mut g = rng(seed);
        let b: Vec<f64> = a.iter().map(|x| x + g.gen_range(-0.1..0.1)).collect();
        let ab = paired_ttest(&a, &b, 0.05, Some(1.0 / 9.0)).unwrap();
        let ba = paired_ttest(&b, &a, 0.05, Some(1.0 / 9.0)).unwrap();
        prop_assert!((ab.t + ba.t).abs() < 1e-9 * ab.t.abs().max(1.0));
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
    }
}

#[test]
fn mean_shift_of_two_sd_is_significant() {
    let mut g = rng(1);
    let z: Vec<f64> = (0..100).map(|_| g.gen_range(-1.0..1.0)).collect();
    let mean = z.iter().sum::<f64>() / 100.0;
    let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
    let d: Vec<f64> = z.iter().map(|x| 0.02 + 0.01 * (x - mean) / sd).collect();
    let zeros = vec![0.0; 100];
    let r = paired_ttest(&d, &zeros, 0.05, Some(1.0 / 9.0)).unwrap();
    let expected = 0.02 / ((0.01 + 1.0 / 9.0) * 1e-4f64).sqrt();
    assert!((r.t - expected).abs() < 1e-9);
    assert!(r.t > T_CRIT_99);
    assert!(r.significant);
}

fn noisy_dataset(n: usize, seed: u64) -> Examples {
    let mut g = rng(seed);
    let rows = random_rows(n, &mut g);
    let labels: Vec<Label> = rows
        .iter()
        .map(|r| Label::from_absent((r[4] < 16 && r[0] == 0) ^ g.gen_bool(0.1)))
        .collect();
    Examples::from_rows(feature_schema(30), &rows, &labels).unwrap()
}

#[test]
fn single_learner_benchmark_has_no_tests() {
    let ex = noisy_dataset(300, 4);
    let cfg = CvConfig {
        runs: 2,
        ..CvConfig::default()
    };
    let r = benchmark(
        &ex,
        &[(LearnerKind::C45, Hyperparams::new())],
        &cfg,
        0.05,
        true,
        3,
    )
    .unwrap();
    assert!(r.ttests.is_empty());
    assert_eq!(r.baseline, Some(LearnerKind::C45));
    let mut csv = Vec::new();
    r.write_metrics_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "learner,stat,accuracy,precision,recall,f1"
    );
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn identical_learners_are_not_significant() {
    let ex = noisy_dataset(300, 6);
    let cfg = CvConfig {
        runs: 2,
        ..CvConfig::default()
    };
    let a = Hyperparams::new();
    let b = Hyperparams::new().with("stale_limit", absence_core::learners::HpValue::Int(5));
    let r = benchmark(
        &ex,
        &[
            (LearnerKind::DecisionTable, a),
            (LearnerKind::DecisionTable, b),
        ],
        &cfg,
        0.05,
        true,
        3,
    )
    .unwrap();
    assert_eq!(r.learners[0].cv.overall, r.learners[1].cv.overall);
    assert_eq!(r.ttests.len(), 1);
    assert_eq!(r.ttests[0].t, 0.0);
    assert!(!r.ttests[0].significant);
}

#[test]
fn single_run_best_equals_average() {
    let ex = noisy_dataset(300, 8);
    let cfg = CvConfig {
        runs: 1,
        ..CvConfig::default()
    };
    let r = cross_validate(&ex, LearnerKind::NaiveBayes, &Hyperparams::new(), &cfg, 1).unwrap();
    assert_eq!(r.best(), &r.overall);
}

#[test]
fn best_run_f1_at_least_average() {
    let ex = noisy_dataset(400, 9);
    let cfg = CvConfig {
        runs: 4,
        ..CvConfig::default()
    };
    for kind in [
        LearnerKind::C45,
        LearnerKind::DecisionTable,
        LearnerKind::NaiveBayes,
    ] {
        let r = cross_validate(&ex, kind, &Hyperparams::new(), &cfg, 2).unwrap();
        assert!(r.best().f1 >= r.overall.f1);
        assert_eq!(r.folds.len(), 4);
        assert!(r.folds.iter().all(|f| f.len() == 10));
        let rows: u64 = r.folds[0].iter().map(|f| f.confusion.total()).sum();
        assert_eq!(rows, 400);
    }
}

#[test]
fn pooled_flag_changes_aggregation() {
    let ex = noisy_dataset(300, 10);
    let pooled = CvConfig {
        runs: 1,
        pooled: true,
        ..CvConfig::default()
    };
    let r = cross_validate(&ex, LearnerKind::C45, &Hyperparams::new(), &pooled, 1).unwrap();
    let cm = r.folds[0].iter().fold(
        Default::default(),
        |a: absence_core::eval::ConfusionMatrix, f| a.merge(&f.confusion),
    );
    assert_eq!(r.run_means[0], metrics(&cm).unwrap());
}
