//! C4.5-style decision tree: entropy-based splits, equality tests on
//! binary features, midpoint thresholds on numeric ones, and
//! subtree-replacement post-pruning with the pessimistic error estimate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Examples, FeatureKind, Label};

/// Gains at or below this are treated as zero.
pub const MIN_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    InfoGain,
    GainRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// Minimum rows in every child of a split.
    pub min_leaf: usize,
    pub prune: bool,
    pub confidence: f64,
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::InfoGain,
            min_leaf: 2,
            prune: true,
            confidence: 0.25,
            max_depth: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitTest {
    /// Child `i` takes rows whose value is `min + i`.
    Equals { feature: usize, min: u16 },
    /// Child 0 takes `value <= threshold`, child 1 the rest.
    Threshold { feature: usize, threshold: f64 },
}

impl SplitTest {
    pub fn feature(&self) -> usize {
        match *self {
            SplitTest::Equals { feature, .. } | SplitTest::Threshold { feature, .. } => feature,
        }
    }

    #[inline]
    pub fn branch(&self, row: &[u16]) -> usize {
        match *self {
            SplitTest::Equals { feature, min } => usize::from(row[feature].saturating_sub(min)),
            SplitTest::Threshold { feature, threshold } => {
                usize::from(f64::from(row[feature]) > threshold)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        class: Label,
        counts: [u32; 2],
    },
    Split {
        test: SplitTest,
        counts: [u32; 2],
        children: Vec<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf(counts: [usize; 2]) -> Self {
        TreeNode::Leaf {
            class: Label::majority(counts),
            counts: [counts[0] as u32, counts[1] as u32],
        }
    }

    pub fn counts(&self) -> [u32; 2] {
        match self {
            TreeNode::Leaf { counts, .. } | TreeNode::Split { counts, .. } => *counts,
        }
    }

    pub fn predict(&self, row: &[u16]) -> Label {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    test,
                    children,
                    counts,
                } => match children.get(test.branch(row)) {
                    Some(child) => node = child,
                    None => return majority_u32(*counts),
                },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { children, .. } => {
                1 + children.iter().map(TreeNode::node_count).sum::<usize>()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { children, .. } => {
                1 + children.iter().map(TreeNode::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    fn leaf_class(&self) -> Option<Label> {
        match self {
            TreeNode::Leaf { class, .. } => Some(*class),
            TreeNode::Split { .. } => None,
        }
    }
}

fn majority_u32(c: [u32; 2]) -> Label {
    Label::majority([c[0] as usize, c[1] as usize])
}

pub fn entropy(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub test: SplitTest,
    pub gain: f64,
    pub split_info: f64,
}

/// Gain and split information for a partition of `parent` into `children`.
fn score(parent: [usize; 2], parent_entropy: f64, children: &[[usize; 2]]) -> (f64, f64) {
    let n = (parent[0] + parent[1]) as f64;
    let mut weighted = 0.0;
    let mut split_info = 0.0;
    for c in children {
        let m = (c[0] + c[1]) as f64;
        if m == 0.0 {
            continue;
        }
        let w = m / n;
        weighted += w * entropy(*c);
        split_info -= w * w.log2();
    }
    (parent_entropy - weighted, split_info)
}

/// Best split of the rows `idx` over `features`. Ties keep the earliest
/// feature, then the lowest threshold. Only splits whose every child holds
/// at least `min_leaf` rows and whose gain exceeds [`MIN_GAIN`] qualify.
pub fn best_split(
    ex: &Examples,
    idx: &[usize],
    features: &[usize],
    params: &TreeParams,
) -> Option<Split> {
    let mut parent = [0usize; 2];
    for &i in idx {
        parent[ex.label(i).index()] += 1;
    }
    let h = entropy(parent);
    let min_leaf = params.min_leaf.max(1);
    let mut candidates: Vec<Split> = Vec::new();
    let mut hist: Vec<[usize; 2]> = Vec::new();
    for &f in features {
        let spec = &ex.schema()[f];
        hist.clear();
        hist.resize(spec.cardinality(), [0, 0]);
        for &i in idx {
            hist[usize::from(ex.value(i, f) - spec.min)][ex.label(i).index()] += 1;
        }
        match spec.kind {
            FeatureKind::Binary => {
                let occupied = hist.iter().filter(|c| c[0] + c[1] > 0).count();
                if occupied < 2 || hist.iter().any(|c| c[0] + c[1] < min_leaf) {
                    continue;
                }
                let (gain, split_info) = score(parent, h, &hist);
                candidates.push(Split {
                    test: SplitTest::Equals {
                        feature: f,
                        min: spec.min,
                    },
                    gain,
                    split_info,
                });
            }
            FeatureKind::Numeric => {
                let total = idx.len();
                let mut left = [0usize; 2];
                let mut prev: Option<usize> = None;
                for (v, c) in hist.iter().enumerate() {
                    if c[0] + c[1] == 0 {
                        continue;
                    }
                    if let Some(p) = prev {
                        let nl = left[0] + left[1];
                        if nl >= min_leaf && total - nl >= min_leaf {
                            let right = [parent[0] - left[0], parent[1] - left[1]];
                            let (gain, split_info) = score(parent, h, &[left, right]);
                            let threshold = f64::from(spec.min) + (p + v) as f64 / 2.0;
                            candidates.push(Split {
                                test: SplitTest::Threshold {
                                    feature: f,
                                    threshold,
                                },
                                gain,
                                split_info,
                            });
                        }
                    }
                    left[0] += c[0];
                    left[1] += c[1];
                    prev = Some(v);
                }
            }
        }
    }
    candidates.retain(|c| c.gain > MIN_GAIN);
    if candidates.is_empty() {
        return None;
    }
    match params.criterion {
        Criterion::InfoGain => {
            let mut best = candidates[0];
            for c in &candidates[1..] {
                if c.gain > best.gain {
                    best = *c;
                }
            }
            Some(best)
        }
        Criterion::GainRatio => {
            // Classic restriction to splits with at least average gain.
            let avg = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
            let ratio = |s: &Split| s.gain / s.split_info.max(f64::MIN_POSITIVE);
            let mut best: Option<Split> = None;
            for c in candidates.iter().filter(|c| c.gain >= avg - 1e-12) {
                if best.is_none_or(|b| ratio(c) > ratio(&b)) {
                    best = Some(*c);
                }
            }
            best
        }
    }
}

/// Candidate features for one node: all of them, or a fresh random subset.
pub(crate) enum FeaturePicker<'r, R> {
    All,
    Subset { size: usize, rng: &'r mut R },
}

impl<R: Rng> FeaturePicker<'_, R> {
    fn pick(&mut self, d: usize) -> Vec<usize> {
        match self {
            FeaturePicker::All => (0..d).collect(),
            FeaturePicker::Subset { size, rng } => {
                let mut all: Vec<usize> = (0..d).collect();
                all.shuffle(*rng);
                all.truncate((*size).clamp(1, d));
                all.sort_unstable();
                all
            }
        }
    }
}

pub(crate) fn grow<R: Rng>(
    ex: &Examples,
    idx: Vec<usize>,
    params: &TreeParams,
    depth: usize,
    picker: &mut FeaturePicker<'_, R>,
) -> TreeNode {
    let mut counts = [0usize; 2];
    for &i in &idx {
        counts[ex.label(i).index()] += 1;
    }
    let pure = counts[0] == 0 || counts[1] == 0;
    if pure || depth >= params.max_depth || idx.len() < 2 * params.min_leaf.max(1) {
        return TreeNode::leaf(counts);
    }
    let features = picker.pick(ex.n_features());
    let Some(split) = best_split(ex, &idx, &features, params) else {
        return TreeNode::leaf(counts);
    };
    let arity = match split.test {
        SplitTest::Equals { feature, .. } => ex.schema()[feature].cardinality(),
        SplitTest::Threshold { .. } => 2,
    };
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); arity];
    for i in idx {
        parts[split.test.branch(ex.row(i))].push(i);
    }
    let children = parts
        .into_iter()
        .map(|p| grow(ex, p, params, depth + 1, picker))
        .collect();
    TreeNode::Split {
        test: split.test,
        counts: [counts[0] as u32, counts[1] as u32],
        children,
    }
}

/// Upper confidence bound on extra errors at a node of `n` rows with `e`
/// training errors, at confidence factor `cf` (C4.5's `AddErrs`).
pub fn added_errors(n: f64, e: f64, cf: f64) -> f64 {
    if cf > 0.5 || n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (added_errors(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
        / (1.0 + z * z / n);
    r * n - e
}

/// Pessimistic error estimate if the node's rows sat in one leaf.
pub fn leaf_estimate(counts: [u32; 2], cf: f64) -> f64 {
    let n = f64::from(counts[0] + counts[1]);
    let e = f64::from(counts[1 - majority_u32(counts).index()]);
    e + added_errors(n, e, cf)
}

/// Sum of leaf estimates under `node`.
pub fn subtree_estimate(node: &TreeNode, cf: f64) -> f64 {
    match node {
        TreeNode::Leaf { counts, .. } => leaf_estimate(*counts, cf),
        TreeNode::Split { children, .. } => children.iter().map(|c| subtree_estimate(c, cf)).sum(),
    }
}

/// Bottom-up subtree replacement: a subtree becomes a majority leaf when
/// its leaf estimate does not exceed the subtree estimate, or when all of
/// its children are leaves predicting the same class.
pub fn c45_prune(node: TreeNode, cf: f64) -> TreeNode {
    match node {
        leaf @ TreeNode::Leaf { .. } => leaf,
        TreeNode::Split {
            test,
            counts,
            children,
        } => {
            let children: Vec<TreeNode> = children.into_iter().map(|c| c45_prune(c, cf)).collect();
            let first = children[0].leaf_class();
            let uniform = first.is_some() && children.iter().all(|c| c.leaf_class() == first);
            let collapsed = TreeNode::Leaf {
                class: majority_u32(counts),
                counts,
            };
            if uniform {
                return collapsed;
            }
            let as_split = TreeNode::Split {
                test,
                counts,
                children,
            };
            if leaf_estimate(counts, cf) <= subtree_estimate(&as_split, cf) {
                collapsed
            } else {
                as_split
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: TreeNode,
}

impl Tree {
    pub fn fit(ex: &Examples, params: &TreeParams) -> Tree {
        let idx: Vec<usize> = (0..ex.len()).collect();
        let mut picker = FeaturePicker::<rand_chacha::ChaCha8Rng>::All;
        let root = grow(ex, idx, params, 0, &mut picker);
        let root = if params.prune {
            c45_prune(root, params.confidence)
        } else {
            root
        };
        Tree { root }
    }

    pub fn predict(&self, row: &[u16]) -> Label {
        self.root.predict(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSpec;

    fn unpruned() -> TreeParams {
        TreeParams {
            prune: false,
            min_leaf: 1,
            ..Default::default()
        }
    }

    fn xs(schema: Vec<FeatureSpec>, rows: &[(&[u16], usize)]) -> Examples {
        let r: Vec<&[u16]> = rows.iter().map(|r| r.0).collect();
        let l: Vec<Label> = rows.iter().map(|r| Label::from_index(r.1)).collect();
        Examples::from_rows(schema, &r, &l).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy([5, 0]), 0.0);
        assert!((entropy([2, 2]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_feature_separator_is_depth_one() {
        let schema = vec![
            FeatureSpec::binary("tv"),
            FeatureSpec::numeric("slot", 0, 47),
        ];
        let rows: Vec<(Vec<u16>, usize)> = (0..40)
            .map(|i| (vec![(i % 2) as u16, (i * 7 % 48) as u16], i % 2))
            .collect();
        let r: Vec<(&[u16], usize)> = rows.iter().map(|(a, b)| (a.as_slice(), *b)).collect();
        let ex = xs(schema, &r);
        let t = Tree::fit(&ex, &TreeParams::default());
        assert_eq!(t.root.depth(), 1);
        assert!(matches!(
            t.root,
            TreeNode::Split {
                test: SplitTest::Equals { feature: 0, .. },
                ..
            }
        ));
        assert!((0..ex.len()).all(|i| t.predict(ex.row(i)) == ex.label(i)));
    }

    #[test]
    fn weighted_xor_needs_depth_two() {
        // The balanced four-row XOR table offers no positive-gain first
        // split; duplicating (0,0) breaks the symmetry.
        let schema = vec![FeatureSpec::binary("a"), FeatureSpec::binary("b")];
        let ex = xs(
            schema.clone(),
            &[
                (&[0, 0], 0),
                (&[0, 0], 0),
                (&[0, 1], 1),
                (&[1, 0], 1),
                (&[1, 1], 0),
            ],
        );
        let t = Tree::fit(&ex, &unpruned());
        assert_eq!(t.root.depth(), 2);
        assert!((0..ex.len()).all(|i| t.predict(ex.row(i)) == ex.label(i)));

        let balanced = xs(
            schema,
            &[(&[0, 0], 0), (&[0, 1], 1), (&[1, 0], 1), (&[1, 1], 0)],
        );
        assert!(Tree::fit(&balanced, &unpruned()).root.is_leaf());
    }

    #[test]
    fn pure_leaf_unchanged_by_pruning() {
        let leaf = TreeNode::leaf([0, 9]);
        assert_eq!(c45_prune(leaf.clone(), 0.25), leaf);
    }

    #[test]
    fn same_class_children_collapse() {
        let node = TreeNode::Split {
            test: SplitTest::Equals { feature: 0, min: 0 },
            counts: [9, 3],
            children: vec![TreeNode::leaf([5, 1]), TreeNode::leaf([4, 2])],
        };
        assert_eq!(c45_prune(node, 0.25), TreeNode::leaf([9, 3]));
    }

    // Pessimistic estimates frozen from an independent evaluation of the
    // normal-approximation bound (z = 0.6744897501960817 at CF = 0.25).
    #[test]
    fn noisy_split_is_replaced_by_leaf() {
        // x = 0: 3 present / 4 absent; x = 1: 10 present / 3 absent.
        let schema = vec![FeatureSpec::binary("x")];
        let mut rows: Vec<(&[u16], usize)> = Vec::new();
        rows.extend(std::iter::repeat_n((&[0u16][..], 0), 3));
        rows.extend(std::iter::repeat_n((&[0u16][..], 1), 4));
        rows.extend(std::iter::repeat_n((&[1u16][..], 0), 10));
        rows.extend(std::iter::repeat_n((&[1u16][..], 1), 3));
        let ex = xs(schema, &rows);
        let grown = Tree::fit(&ex, &unpruned()).root;
        assert_eq!(grown.depth(), 1);
        assert!((leaf_estimate(grown.counts(), 0.25) - 9.000654882941685).abs() < 1e-9);
        assert!((subtree_estimate(&grown, 0.25) - 9.03119274527736).abs() < 1e-9);
        assert_eq!(c45_prune(grown, 0.25), TreeNode::leaf([13, 7]));
    }

    #[test]
    fn informative_split_survives_pruning() {
        // x = 0: one absent row; x = 1: 15 present / 4 absent.
        let node = TreeNode::Split {
            test: SplitTest::Equals { feature: 0, min: 0 },
            counts: [15, 5],
            children: vec![TreeNode::leaf([0, 1]), TreeNode::leaf([15, 4])],
        };
        assert!((leaf_estimate([15, 5], 0.25) - 6.935647460446637).abs() < 1e-9);
        assert!((subtree_estimate(&node, 0.25) - 6.607679911891465).abs() < 1e-9);
        assert_eq!(c45_prune(node.clone(), 0.25), node);
    }

    #[test]
    fn gain_ratio_variant_runs() {
        let schema = vec![FeatureSpec::binary("a"), FeatureSpec::numeric("b", 0, 9)];
        let rows: Vec<(Vec<u16>, usize)> = (0..30)
            .map(|i| {
                (
                    vec![(i % 2) as u16, (i % 10) as u16],
                    usize::from(i % 10 > 6),
                )
            })
            .collect();
        let r: Vec<(&[u16], usize)> = rows.iter().map(|(a, b)| (a.as_slice(), *b)).collect();
        let ex = xs(schema, &r);
        let t = Tree::fit(
            &ex,
            &TreeParams {
                criterion: Criterion::GainRatio,
                ..unpruned()
            },
        );
        assert!((0..ex.len()).all(|i| t.predict(ex.row(i)) == ex.label(i)));
    }
}
