#![allow(dead_code)]

use absence_core::dataset::feature_schema;
use absence_core::learners::network::Network;
use absence_core::learners::tree::SplitTest;
use absence_core::learners::{HpValue, Hyperparams, LearnerKind};
use absence_core::{Examples, FeatureKind, Label};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform rows over the half-hourly schema.
pub fn random_rows(n: usize, rng: &mut ChaCha8Rng) -> Vec<[u16; 8]> {
    let schema = feature_schema(30);
    (0..n)
        .map(|_| {
            let mut r = [0u16; 8];
            for (v, s) in r.iter_mut().zip(&schema) {
                *v = rng.gen_range(s.min..=s.max);
            }
            r
        })
        .collect()
}

/// Noiseless dataset whose label is the `tv` feature.
pub fn tv_dataset(n: usize, seed: u64) -> Examples {
    let mut g = rng(seed);
    let mut rows = random_rows(n, &mut g);
    rows[0][0] = 0;
    rows[1][0] = 1;
    let labels: Vec<Label> = rows.iter().map(|r| Label::from_absent(r[0] == 1)).collect();
    Examples::from_rows(feature_schema(30), &rows, &labels).unwrap()
}

pub fn entropy(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    c.iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn counts<'a>(labels: impl Iterator<Item = &'a Label>) -> [usize; 2] {
    let mut c = [0; 2];
    for l in labels {
        c[l.index()] += 1;
    }
    c
}

/// Information gain of a row partition, recomputed from scratch.
pub fn partition_gain(ex: &Examples, groups: &[Vec<usize>]) -> f64 {
    let all: Vec<usize> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let parent = entropy(counts(all.iter().map(|&i| &ex.labels()[i])));
    let child: f64 = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| g.len() as f64 / n * entropy(counts(g.iter().map(|&i| &ex.labels()[i]))))
        .sum();
    parent - child
}

/// Exhaustive search over every feature and every midpoint threshold.
pub fn brute_force_best_gain(ex: &Examples) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (f, spec) in ex.schema().iter().enumerate() {
        let mut values: Vec<u16> = (0..ex.len()).map(|i| ex.value(i, f)).collect();
        values.sort_unstable();
        values.dedup();
        let mut consider = |g: f64| {
            if g > 1e-10 && best.is_none_or(|b| g > b) {
                best = Some(g);
            }
        };
        match spec.kind {
            FeatureKind::Binary => {
                if values.len() == 2 {
                    let groups: Vec<Vec<usize>> = values
                        .iter()
                        .map(|&v| (0..ex.len()).filter(|&i| ex.value(i, f) == v).collect())
                        .collect();
                    consider(partition_gain(ex, &groups));
                }
            }
            FeatureKind::Numeric => {
                for w in values.windows(2) {
                    let t = (f64::from(w[0]) + f64::from(w[1])) / 2.0;
                    let left = (0..ex.len())
                        .filter(|&i| f64::from(ex.value(i, f)) <= t)
                        .collect();
                    let right = (0..ex.len())
                        .filter(|&i| f64::from(ex.value(i, f)) > t)
                        .collect();
                    consider(partition_gain(ex, &[left, right]));
                }
            }
        }
    }
    best
}

/// Gain of a chosen split test, recomputed on the raw rows.
pub fn test_gain(ex: &Examples, test: &SplitTest, arity: usize) -> f64 {
    let mut groups = vec![Vec::new(); arity];
    for i in 0..ex.len() {
        groups[test.branch(ex.row(i))].push(i);
    }
    partition_gain(ex, &groups)
}

pub fn small_random_dataset(g: &mut ChaCha8Rng) -> Examples {
    let n = g.gen_range(2..=64);
    let rows = random_rows(n, g);
    let p = g.gen_range(0.1..0.9);
    let labels: Vec<Label> = rows
        .iter()
        .map(|r| {
            let signal = r[0] == 1 && r[4] > 20;
            Label::from_absent(if g.gen_bool(0.7) {
                signal
            } else {
                g.gen_bool(p)
            })
        })
        .collect();
    Examples::from_rows(feature_schema(30), &rows, &labels).unwrap()
}

/// Settings that let every learner fit [`tv_dataset`] quickly.
pub fn fast_hp(kind: LearnerKind) -> Hyperparams {
    match kind {
        LearnerKind::RandomForest => Hyperparams::new().with("tree_count", HpValue::Int(15)),
        LearnerKind::Mlp => Hyperparams::new()
            .with("layer_sizes", HpValue::List(vec![8]))
            .with("learning_rate", HpValue::Real(0.05))
            .with("epochs", HpValue::Int(150))
            .with("batch_size", HpValue::Int(32)),
        LearnerKind::DeepNet => Hyperparams::new()
            .with("layer_sizes", HpValue::List(vec![16, 16, 16]))
            .with("learning_rate", HpValue::Real(0.01))
            .with("epochs", HpValue::Int(150))
            .with("batch_size", HpValue::Int(32)),
        _ => Hyperparams::new(),
    }
}

/// Largest relative error between analytic and central-difference
/// gradients over `points` random networks and inputs.
pub fn gradient_check_worst(seed: u64, points: usize) -> f64 {
    let mut g = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let mut net = Network::<f64>::new(2, &[2], &mut g);
        let mut p = net.parameters();
        for w in p.iter_mut() {
            *w = g.gen_range(-1.0..1.0);
        }
        net.set_parameters(&p);
        let x = [g.gen_range(-2.0..2.0), g.gen_range(-2.0..2.0)];
        let y = [f64::from(g.gen_range(0..2u8))];
        let (_, grad) = net.loss_and_gradient(&x, &y, 0.0);
        let h = 1e-5;
        for k in 0..p.len() {
            let mut plus = p.clone();
            plus[k] += h;
            let mut minus = p.clone();
            minus[k] -= h;
            net.set_parameters(&plus);
            let lp = net.loss_and_gradient(&x, &y, 0.0).0;
            net.set_parameters(&minus);
            let lm = net.loss_and_gradient(&x, &y, 0.0).0;
            let numeric = (lp - lm) / (2.0 * h);
            let scale = grad[k].abs().max(numeric.abs());
            if scale > 0.0 {
                worst = worst.max((grad[k] - numeric).abs() / scale);
            }
        }
    }
    worst
}
