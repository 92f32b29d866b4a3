mod common;

use absence_core::dataset::feature_schema;
use absence_core::learners::network::{NetParams, Network};
use absence_core::learners::tree::{self, best_split, c45_prune, SplitTest, TreeNode, TreeParams};
use absence_core::learners::{
    fit, Forest, ForestParams, HpValue, Hyperparams, LearnerError, LearnerKind, Model, ModelBody,
};
use absence_core::{Examples, FeatureSpec, Label};
use common::*;
use proptest::prelude::*;

fn training_accuracy(m: &Model, ex: &Examples) -> f64 {
    let p = m.predict_batch(ex).unwrap();
    p.iter().zip(ex.labels()).filter(|(a, b)| a == b).count() as f64 / ex.len() as f64
}

#[test]
fn every_learner_fits_single_feature_target() {
    let ex = tv_dataset(200, 3);
    for kind in LearnerKind::ALL {
        let m = fit(kind, &ex, &fast_hp(kind), 11).unwrap();
        assert_eq!(training_accuracy(&m, &ex), 1.0, "{kind}");
    }
}

#[test]
fn single_class_gives_constant_model() {
    let mut g = rng(5);
    let rows = random_rows(30, &mut g);
    let ex = Examples::from_rows(feature_schema(30), &rows, &vec![Label::Absent; 30]).unwrap();
    for kind in LearnerKind::ALL {
        let m = fit(kind, &ex, &Hyperparams::new(), 1).unwrap();
        assert!(matches!(
            m.body,
            ModelBody::Constant {
                class: Label::Absent
            }
        ));
        for r in random_rows(20, &mut g) {
            assert_eq!(m.predict(&r).unwrap(), Label::Absent);
        }
    }
}

#[test]
fn empty_and_invalid_inputs_are_rejected() {
    let ex = Examples::new(feature_schema(30));
    assert!(matches!(
        fit(LearnerKind::C45, &ex, &Hyperparams::new(), 0),
        Err(LearnerError::Empty)
    ));
    let ex = tv_dataset(40, 1);
    let bad = Hyperparams::new().with("bogus", HpValue::Int(1));
    assert!(matches!(
        fit(LearnerKind::C45, &ex, &bad, 0),
        Err(LearnerError::Schema(_))
    ));
    let m = fit(LearnerKind::C45, &ex, &Hyperparams::new(), 0).unwrap();
    let err = m.predict(&[0, 0, 0, 0, 48, 0, 1, 1]).unwrap_err();
    assert!(matches!(err, LearnerError::Data(_)));
}

#[test]
fn c45_on_tv_target_is_one_split() {
    let ex = tv_dataset(100, 9);
    let m = fit(LearnerKind::C45, &ex, &Hyperparams::new(), 0).unwrap();
    let ModelBody::Tree(t) = &m.body else {
        panic!()
    };
    assert_eq!(t.root.depth(), 1);
    match &t.root {
        TreeNode::Split { test, children, .. } => {
            assert_eq!(test.feature(), 0);
            assert_eq!(children.len(), 2);
        }
        TreeNode::Leaf { .. } => panic!("expected a split"),
    }
}

#[test]
fn forest_votes() {
    let a = TreeNode::leaf([0, 3]);
    let p = TreeNode::leaf([3, 0]);
    assert_eq!(
        Forest::from_trees(vec![a.clone(), a.clone(), p.clone()]).predict(&[]),
        Label::Absent
    );
    assert_eq!(
        Forest::from_trees(vec![a.clone(), p.clone(), a, p]).predict(&[]),
        Label::Present
    );
}

#[test]
fn kde_bayes_is_uninformed_by_xor_marginals() {
    let schema = vec![FeatureSpec::binary("a"), FeatureSpec::binary("b")];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..25 {
        for (a, b) in [(0u16, 0u16), (0, 1), (1, 0), (1, 1)] {
            rows.push([a, b]);
            labels.push(Label::from_absent(a != b));
        }
    }
    let ex = Examples::from_rows(schema, &rows, &labels).unwrap();
    let m = fit(LearnerKind::NaiveBayes, &ex, &Hyperparams::new(), 0).unwrap();
    let acc = training_accuracy(&m, &ex);
    assert!((acc - 0.5).abs() < 1e-12, "{acc}");
}

#[test]
fn decision_table_selects_weekday() {
    let mut g = rng(21);
    let mut rows = random_rows(210, &mut g);
    for (i, r) in rows.iter_mut().enumerate() {
        r[5] = (i % 7) as u16;
    }
    let labels: Vec<Label> = rows.iter().map(|r| Label::from_absent(r[5] >= 5)).collect();
    let ex = Examples::from_rows(feature_schema(30), &rows, &labels).unwrap();
    let m = fit(LearnerKind::DecisionTable, &ex, &Hyperparams::new(), 0).unwrap();
    let ModelBody::Table(t) = &m.body else {
        panic!()
    };
    assert_eq!(t.features, vec![5]);
    assert_eq!(t.merit, 1.0);
}

#[test]
fn single_tree_forest_matches_c45() {
    let ex = tv_dataset(150, 4);
    let mut g = rng(8);
    let rows = random_rows(150, &mut g);
    let labels: Vec<Label> = rows
        .iter()
        .map(|r| Label::from_absent(r[4] > 30 || (r[1] == 1 && r[7] < 4)))
        .collect();
    let noisy = Examples::from_rows(feature_schema(30), &rows, &labels).unwrap();
    for data in [&ex, &noisy] {
        let tp = TreeParams::default();
        let single = tree::Tree::fit(data, &tp);
        let forest = Forest::fit(
            data,
            &ForestParams {
                tree_count: 1,
                feature_subset: Some(8),
                bootstrap: false,
                tree: tp,
            },
            99,
        );
        assert_eq!(forest.trees[0], single.root);
        for r in random_rows(200, &mut g) {
            assert_eq!(forest.predict(&r), single.predict(&r));
        }
    }
}

#[test]
fn predictions_survive_save_and_load() {
    let mut g = rng(2);
    let rows = random_rows(300, &mut g);
    let labels: Vec<Label> = rows
        .iter()
        .map(|r| Label::from_absent(r[4] + r[5] * 3 > 40))
        .collect();
    let ex = Examples::from_rows(feature_schema(30), &rows, &labels).unwrap();
    let probe = random_rows(300, &mut g);
    for kind in LearnerKind::ALL {
        let m = fit(kind, &ex, &fast_hp(kind), 5).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = Model::load(buf.as_slice()).unwrap();
        assert_eq!(back, m, "{kind}");
        for r in &probe {
            let a = m.predict(r).unwrap();
            assert_eq!(a, m.predict(r).unwrap());
            assert_eq!(a, back.predict(r).unwrap());
        }
        let again = fit(kind, &ex, &fast_hp(kind), 5).unwrap();
        assert_eq!(again, m, "training not reproducible for {kind}");
    }
}

#[test]
fn network_gradient_matches_finite_differences() {
    let worst = gradient_check_worst(17, 10);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn l2_term_enters_gradient() {
    let mut g = rng(3);
    let net = Network::<f64>::new(3, &[4], &mut g);
    let x = [0.1, 0.5, 0.9];
    let y = [1.0];
    let (l0, g0) = net.loss_and_gradient(&x, &y, 0.0);
    let (l1, g1) = net.loss_and_gradient(&x, &y, 0.1);
    let w = &net.layers[0].weights;
    let extra: f64 = net
        .layers
        .iter()
        .flat_map(|l| l.weights.iter())
        .map(|w| 0.05 * w * w)
        .sum();
    assert!((l1 - l0 - extra).abs() < 1e-12);
    assert!((g1[0] - g0[0] - 0.1 * w[0]).abs() < 1e-12);
    let _ = NetParams::default();
}

/// Walks both trees; rows whose pruned path ends where the original also
/// ends must be classified identically.
fn untouched_paths_agree(orig: &TreeNode, pruned: &TreeNode, row: &[u16]) -> bool {
    match (orig, pruned) {
        (TreeNode::Split { test, children, .. }, TreeNode::Split { children: pc, .. }) => {
            let b = test.branch(row);
            untouched_paths_agree(&children[b], &pc[b], row)
        }
        (TreeNode::Leaf { .. }, TreeNode::Leaf { .. }) => orig.predict(row) == pruned.predict(row),
        (TreeNode::Split { .. }, TreeNode::Leaf { .. }) => true,
        (TreeNode::Leaf { .. }, TreeNode::Split { .. }) => false,
    }
}

fn check_invariants(node: &TreeNode) {
    if let TreeNode::Split {
        children, counts, ..
    } = node
    {
        assert!(children.len() >= 2);
        let sum = children.iter().fold([0u32; 2], |a, c| {
            let k = c.counts();
            [a[0] + k[0], a[1] + k[1]]
        });
        assert_eq!(&sum, counts);
        children.iter().for_each(check_invariants);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_choice_matches_exhaustive_gain(seed in any::<u64>()) {
        let ex = small_random_dataset(&mut rng(seed));
        let params = TreeParams { min_leaf: 1, ..TreeParams::default() };
        let idx: Vec<usize> = (0..ex.len()).collect();
        let features: Vec<usize> = (0..ex.n_features()).collect();
        let chosen = best_split(&ex, &idx, &features, &params);
        let oracle = brute_force_best_gain(&ex);
        match (chosen, oracle) {
            (None, None) => {}
            (Some(s), Some(best)) => {
                let arity = match s.test {
                    SplitTest::Equals { feature, .. } => ex.schema()[feature].cardinality(),
                    SplitTest::Threshold { .. } => 2,
                };
                let recomputed = test_gain(&ex, &s.test, arity);
                prop_assert!((s.gain - best).abs() < 1e-12);
                prop_assert!((recomputed - best).abs() < 1e-12);
            }
            (c, o) => prop_assert!(false, "chosen {:?} oracle {:?}", c.map(|s| s.gain), o),
        }
    }

    #[test]
    fn pruning_shrinks_and_keeps_untouched_predictions(seed in any::<u64>(), cf in 0.01f64..0.5) {
        let mut g = rng(seed);
        let ex = small_random_dataset(&mut g);
        let grown = tree::Tree::fit(&ex, &TreeParams { prune: false, min_leaf: 1, ..TreeParams::default() }).root;
        let pruned = c45_prune(grown.clone(), cf);
        check_invariants(&grown);
        check_invariants(&pruned);
        prop_assert!(pruned.node_count() <= grown.node_count());
        for r in random_rows(64, &mut g) {
            prop_assert!(untouched_paths_agree(&grown, &pruned, &r));
        }
    }

    #[test]
    fn bayes_posterior_normalized(seed in any::<u64>()) {
        let mut g = rng(seed);
        let ex = small_random_dataset(&mut g);
        prop_assume!(ex.class_counts().iter().all(|&c| c > 0));
        let nb = absence_core::learners::KdeNaiveBayes::<f64>::fit(&ex, &Default::default());
        for r in random_rows(32, &mut g) {
            let lj = nb.log_joint(&r);
            prop_assert!(lj.iter().all(|v| v.is_finite()));
            let p = nb.predict_proba(&r);
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn single_precision_network_trains() {
    let ex = common::tv_dataset(200, 21);
    let params = absence_core::learners::NetParams {
        hidden: vec![8],
        learning_rate: 0.05,
        epochs: 60,
        batch_size: 16,
        ..Default::default()
    };
    let net = absence_core::Net32::train(&ex, &params, 5).unwrap();
    let hits = (0..ex.len())
        .filter(|&i| net.predict_row(ex.row(i)) == ex.label(i))
        .count();
    assert_eq!(hits, ex.len());
}
