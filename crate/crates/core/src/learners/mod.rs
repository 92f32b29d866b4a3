//! Six classifier families behind one fit/predict contract.
//!
//! [`fit`] validates a [`Hyperparams`] map against the learner's schema and
//! trains a [`Model`]; [`Model::predict`] checks the row encoding first.
//! Models round-trip through JSON with bit-identical predictions.

pub mod forest;
pub mod hyperparams;
pub mod naive_bayes;
pub mod network;
pub mod table;
pub mod tree;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{validate_row, DataError, Examples, FeatureSpec, Label};
use crate::seed;
pub use forest::{Forest, ForestParams};
use hyperparams::HpReader;
pub use hyperparams::{HpValue, Hyperparams};
pub use naive_bayes::{Bandwidth, BayesParams, KdeNaiveBayes};
pub use network::{NetParams, Network};
pub use table::{DecisionTable, TableParams};
pub use tree::{Criterion, Tree, TreeNode, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Hidden-layer limit for [`LearnerKind::Mlp`].
pub const MLP_MAX_LAYERS: usize = 10;
/// Hidden-layer limit for [`LearnerKind::DeepNet`].
pub const DEEP_MAX_LAYERS: usize = 32;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("cannot train on an empty dataset")]
    Empty,
    #[error("hyperparameter schema: {0}")]
    Schema(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    DecisionTable,
    C45,
    RandomForest,
    NaiveBayes,
    Mlp,
    DeepNet,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::DecisionTable,
        LearnerKind::C45,
        LearnerKind::RandomForest,
        LearnerKind::NaiveBayes,
        LearnerKind::Mlp,
        LearnerKind::DeepNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::DecisionTable => "decision_table",
            LearnerKind::C45 => "c45",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::NaiveBayes => "naive_bayes",
            LearnerKind::Mlp => "mlp",
            LearnerKind::DeepNet => "deep_net",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                LearnerError::Schema(format!(
                    "unknown learner `{s}`; valid kinds: {}",
                    Self::valid_names()
                ))
            })
    }
}

/// Learner configuration after schema validation.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerParams {
    Table(TableParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Bayes(BayesParams),
    Network(NetParams),
}

fn tree_params(r: &mut HpReader<'_>, defaults: TreeParams) -> Result<TreeParams, LearnerError> {
    let criterion = match r.choice("criterion", "info_gain", &["info_gain", "gain_ratio"])? {
        "gain_ratio" => Criterion::GainRatio,
        _ => Criterion::InfoGain,
    };
    Ok(TreeParams {
        criterion,
        min_leaf: r.int("min_leaf", defaults.min_leaf as i64, 1, 1_000_000)? as usize,
        prune: r.boolean("prune", defaults.prune)?,
        confidence: r.real("pruning_confidence", defaults.confidence, 1e-4, 0.5)?,
        max_depth: r.int("max_depth", defaults.max_depth as i64, 1, 1024)? as usize,
    })
}

fn net_params(r: &mut HpReader<'_>, kind: LearnerKind) -> Result<NetParams, LearnerError> {
    let (max_layers, default_layers, default_units) = match kind {
        LearnerKind::Mlp => (MLP_MAX_LAYERS, 2, 32),
        _ => (DEEP_MAX_LAYERS, 4, 64),
    };
    let layers = r.int("hidden_layers", default_layers, 1, max_layers as i64)? as usize;
    let units = r.int("hidden_units", default_units, 1, 4096)? as usize;
    let hidden = match r.list("layer_sizes")? {
        Some(sizes) => {
            if sizes.is_empty() || sizes.len() > max_layers {
                return Err(LearnerError::Schema(format!(
                    "`layer_sizes` needs 1 to {max_layers} hidden layers for {kind}, got {}",
                    sizes.len()
                )));
            }
            sizes
                .iter()
                .map(|&s| {
                    usize::try_from(s)
                        .ok()
                        .filter(|&s| (1..=4096).contains(&s))
                        .ok_or_else(|| {
                            LearnerError::Schema(format!("layer size {s} outside [1, 4096]"))
                        })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        None => vec![units; layers],
    };
    let d = NetParams::default();
    Ok(NetParams {
        hidden,
        learning_rate: r.real("learning_rate", d.learning_rate, 0.0, 10.0)?,
        epochs: r.int("epochs", d.epochs as i64, 1, 100_000)? as usize,
        batch_size: r.int("batch_size", d.batch_size as i64, 1, 1 << 20)? as usize,
        l2: r.real("l2", d.l2, 0.0, 10.0)?,
        ..d
    })
}

/// Validates `hp` against the schema of `kind`.
pub fn params_for(kind: LearnerKind, hp: &Hyperparams) -> Result<LearnerParams, LearnerError> {
    let mut r = HpReader::new(hp);
    let p = match kind {
        LearnerKind::DecisionTable => LearnerParams::Table(TableParams {
            stale_limit: r.int("stale_limit", 5, 1, 1000)? as usize,
        }),
        LearnerKind::C45 => LearnerParams::Tree(tree_params(&mut r, TreeParams::default())?),
        LearnerKind::RandomForest => {
            let d = ForestParams::default();
            let tree_count = r.int("tree_count", d.tree_count as i64, 1, 10_000)? as usize;
            let subset = r.int("feature_subset_size", 0, 0, 1 << 16)? as usize;
            let bootstrap = r.boolean("bootstrap", d.bootstrap)?;
            let tree = tree_params(&mut r, d.tree)?;
            LearnerParams::Forest(ForestParams {
                tree_count,
                feature_subset: (subset > 0).then_some(subset),
                bootstrap,
                tree,
            })
        }
        LearnerKind::NaiveBayes => {
            let d = BayesParams::default();
            let bandwidth =
                match r.choice("bandwidth_mode", "silverman", &["silverman", "scott"])? {
                    "scott" => Bandwidth::Scott,
                    _ => Bandwidth::Silverman,
                };
            LearnerParams::Bayes(BayesParams {
                bandwidth,
                bandwidth_scale: r.real("bandwidth_scale", d.bandwidth_scale, 1e-3, 100.0)?,
                min_bandwidth: r.real("min_bandwidth", d.min_bandwidth, 1e-6, 1e3)?,
            })
        }
        LearnerKind::Mlp | LearnerKind::DeepNet => {
            LearnerParams::Network(net_params(&mut r, kind)?)
        }
    };
    r.finish()?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelBody {
    /// Training data held a single class.
    Constant {
        class: Label,
    },
    Table(DecisionTable),
    Tree(Tree),
    Forest(Forest),
    Bayes(KdeNaiveBayes<f64>),
    Network(Network<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub kind: LearnerKind,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub schema: Vec<FeatureSpec>,
    pub body: ModelBody,
}

/// Trains `kind` on `ex`. Training is a pure function of its arguments.
pub fn fit(
    kind: LearnerKind,
    ex: &Examples,
    hp: &Hyperparams,
    seed_value: u64,
) -> Result<Model, LearnerError> {
    let params = params_for(kind, hp)?;
    if ex.is_empty() {
        return Err(LearnerError::Empty);
    }
    let counts = ex.class_counts();
    let body = if counts[0] == 0 || counts[1] == 0 {
        ModelBody::Constant {
            class: Label::majority(counts),
        }
    } else {
        match params {
            LearnerParams::Table(p) => ModelBody::Table(DecisionTable::fit(ex, &p)?),
            LearnerParams::Tree(p) => ModelBody::Tree(Tree::fit(ex, &p)),
            LearnerParams::Forest(p) => {
                ModelBody::Forest(Forest::fit(ex, &p, seed::derive(seed_value, "forest")))
            }
            LearnerParams::Bayes(p) => ModelBody::Bayes(KdeNaiveBayes::fit(ex, &p)),
            LearnerParams::Network(p) => ModelBody::Network(Network::train(ex, &p, seed_value)?),
        }
    };
    Ok(Model {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        hyperparams: hp.clone(),
        seed: seed_value,
        schema: ex.schema().to_vec(),
        body,
    })
}

impl Model {
    pub fn predict(&self, row: &[u16]) -> Result<Label, LearnerError> {
        validate_row(&self.schema, row)?;
        Ok(self.predict_unchecked(row))
    }

    /// Caller guarantees `row` matches the schema.
    pub fn predict_unchecked(&self, row: &[u16]) -> Label {
        match &self.body {
            ModelBody::Constant { class } => *class,
            ModelBody::Table(t) => t.predict(row),
            ModelBody::Tree(t) => t.predict(row),
            ModelBody::Forest(f) => f.predict(row),
            ModelBody::Bayes(b) => b.predict(row),
            ModelBody::Network(n) => n.predict_row(row),
        }
    }

    /// Predictions for every row of `ex`, which must share the model's schema.
    pub fn predict_batch(&self, ex: &Examples) -> Result<Vec<Label>, LearnerError> {
        if ex.schema() != self.schema.as_slice() {
            return Err(LearnerError::Schema(
                "examples do not match the model's feature schema".into(),
            ));
        }
        Ok((0..ex.len())
            .map(|i| self.predict_unchecked(ex.row(i)))
            .collect())
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), LearnerError> {
        serde_json::to_writer(w, self).map_err(|e| LearnerError::Format(e.to_string()))
    }

    pub fn load<R: Read>(r: R) -> Result<Model, LearnerError> {
        let m: Model =
            serde_json::from_reader(r).map_err(|e| LearnerError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnerError::Format(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in LearnerKind::ALL {
            assert_eq!(k.name().parse::<LearnerKind>().unwrap(), k);
        }
        let err = "svm".parse::<LearnerKind>().unwrap_err().to_string();
        assert!(err.contains("deep_net"));
    }

    #[test]
    fn schema_rejects_bad_values() {
        let hp = Hyperparams::new().with("tree_count", HpValue::Int(10));
        assert!(params_for(LearnerKind::C45, &hp).is_err());
        assert!(params_for(LearnerKind::RandomForest, &hp).is_ok());
        let deep = Hyperparams::new().with("layer_sizes", HpValue::List(vec![8; 12]));
        assert!(params_for(LearnerKind::Mlp, &deep).is_err());
        assert!(params_for(LearnerKind::DeepNet, &deep).is_ok());
        let conf = Hyperparams::new().with("pruning_confidence", HpValue::Real(0.9));
        assert!(params_for(LearnerKind::C45, &conf).is_err());
    }
}
