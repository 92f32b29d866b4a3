use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{c45_prune, grow, FeaturePicker, TreeNode, TreeParams};
use crate::data::{Examples, Label};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree_count: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub feature_subset: Option<usize>,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree_count: 100,
            feature_subset: None,
            bootstrap: true,
            tree: TreeParams {
                prune: false,
                min_leaf: 1,
                ..TreeParams::default()
            },
        }
    }
}

/// Majority vote over C4.5 member trees; ties go to `Present`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
}

impl Forest {
    pub fn from_trees(trees: Vec<TreeNode>) -> Self {
        Forest { trees }
    }

    /// Each tree draws from its own RNG stream derived from `seed` and the
    /// tree index, so the result does not depend on thread scheduling.
    pub fn fit(ex: &Examples, params: &ForestParams, seed_value: u64) -> Forest {
        let d = ex.n_features();
        let m = params
            .feature_subset
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1));
        let n = ex.len();
        let trees = (0..params.tree_count)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed_value, &format!("tree/{t}")));
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let root = if m >= d {
                    grow(
                        ex,
                        idx,
                        &params.tree,
                        0,
                        &mut FeaturePicker::<rand_chacha::ChaCha8Rng>::All,
                    )
                } else {
                    grow(
                        ex,
                        idx,
                        &params.tree,
                        0,
                        &mut FeaturePicker::Subset {
                            size: m,
                            rng: &mut rng,
                        },
                    )
                };
                if params.tree.prune {
                    c45_prune(root, params.tree.confidence)
                } else {
                    root
                }
            })
            .collect();
        Forest { trees }
    }

    pub fn votes(&self, row: &[u16]) -> [usize; 2] {
        let mut v = [0; 2];
        for t in &self.trees {
            v[t.predict(row).index()] += 1;
        }
        v
    }

    pub fn predict(&self, row: &[u16]) -> Label {
        Label::majority(self.votes(row))
    }
}
