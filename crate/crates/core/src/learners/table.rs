//! Decision table: a majority-class lookup keyed by the values of a feature
//! subset chosen by best-first search on leave-one-out accuracy.

use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::data::{Examples, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    /// Expansions without improvement before the search stops.
    pub stale_limit: usize,
}

impl Default for TableParams {
    fn default() -> Self {
        TableParams { stale_limit: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub key: Vec<u16>,
    pub counts: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub features: Vec<usize>,
    /// Sorted by key.
    pub entries: Vec<TableEntry>,
    pub default_class: Label,
    pub merit: f64,
}

/// Mixed-radix packing of the selected feature values.
struct KeyCoder {
    features: Vec<usize>,
    mins: Vec<u16>,
    radices: Vec<u64>,
}

impl KeyCoder {
    fn new(ex: &Examples, features: &[usize]) -> Result<Self, LearnerError> {
        let mut radices = Vec::with_capacity(features.len());
        let mut total: u64 = 1;
        for &f in features {
            radices.push(total);
            total = total
                .checked_mul(ex.schema()[f].cardinality() as u64)
                .ok_or_else(|| {
                    LearnerError::Schema("feature subset too wide for a decision table key".into())
                })?;
        }
        Ok(KeyCoder {
            features: features.to_vec(),
            mins: features.iter().map(|&f| ex.schema()[f].min).collect(),
            radices,
        })
    }

    fn code(&self, row: &[u16]) -> u64 {
        self.features
            .iter()
            .zip(&self.mins)
            .zip(&self.radices)
            .map(|((&f, &m), &r)| u64::from(row[f] - m) * r)
            .sum()
    }
}

/// Leave-one-out accuracy of the table over `features`. A held-out row is
/// predicted by the majority of the remaining rows in its cell (ties to
/// `Present`), or by the remaining global majority when its cell is empty.
pub fn loo_accuracy(ex: &Examples, features: &[usize]) -> Result<f64, LearnerError> {
    if ex.is_empty() {
        return Err(LearnerError::Empty);
    }
    let coder = KeyCoder::new(ex, features)?;
    let mut cells: HashMap<u64, [usize; 2]> = HashMap::new();
    for i in 0..ex.len() {
        cells.entry(coder.code(ex.row(i))).or_default()[ex.label(i).index()] += 1;
    }
    let global = ex.class_counts();
    let mut correct = 0usize;
    for c in cells.values() {
        for y in 0..2 {
            if c[y] == 0 {
                continue;
            }
            let mut rest = *c;
            rest[y] -= 1;
            let pred = if rest[0] + rest[1] == 0 {
                let mut g = global;
                g[y] -= 1;
                Label::majority(g)
            } else {
                Label::majority(rest)
            };
            if pred.index() == y {
                correct += c[y];
            }
        }
    }
    Ok(correct as f64 / ex.len() as f64)
}

#[derive(PartialEq)]
struct Node {
    merit: f64,
    mask: u64,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.merit
            .total_cmp(&other.merit)
            .then_with(|| other.mask.count_ones().cmp(&self.mask.count_ones()))
            .then_with(|| other.mask.cmp(&self.mask))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn mask_features(mask: u64) -> Vec<usize> {
    (0..64).filter(|f| mask & (1 << f) != 0).collect()
}

/// Forward best-first search over non-empty feature subsets.
pub fn select_features(
    ex: &Examples,
    params: &TableParams,
) -> Result<(Vec<usize>, f64), LearnerError> {
    let d = ex.n_features();
    if d == 0 {
        return Ok((Vec::new(), loo_accuracy(ex, &[])?));
    }
    if d > 64 {
        return Err(LearnerError::Schema(
            "decision table search supports at most 64 features".into(),
        ));
    }
    let mut open = BinaryHeap::new();
    let mut visited = HashSet::new();
    open.push(Node {
        merit: f64::NEG_INFINITY,
        mask: 0,
    });
    visited.insert(0u64);
    let mut best: Option<(f64, u64)> = None;
    let mut stale = 0;
    while let Some(head) = open.pop() {
        let mut improved = false;
        for f in 0..d {
            let child = head.mask | (1 << f);
            if child == head.mask || !visited.insert(child) {
                continue;
            }
            let merit = loo_accuracy(ex, &mask_features(child))?;
            open.push(Node { merit, mask: child });
            let better = match best {
                None => true,
                Some((m, mask)) => {
                    merit > m + 1e-12
                        || ((merit - m).abs() <= 1e-12 && child.count_ones() < mask.count_ones())
                }
            };
            if better {
                best = Some((merit, child));
                improved = true;
            }
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.stale_limit.max(1) {
                break;
            }
        }
    }
    let (merit, mask) = best.expect("at least one feature evaluated");
    Ok((mask_features(mask), merit))
}

impl DecisionTable {
    pub fn fit(ex: &Examples, params: &TableParams) -> Result<DecisionTable, LearnerError> {
        let (features, merit) = select_features(ex, params)?;
        Ok(Self::build(ex, features, merit))
    }

    /// Table over a fixed feature subset.
    pub fn build(ex: &Examples, features: Vec<usize>, merit: f64) -> DecisionTable {
        let mut cells: HashMap<Vec<u16>, [u32; 2]> = HashMap::new();
        for i in 0..ex.len() {
            let key: Vec<u16> = features.iter().map(|&f| ex.value(i, f)).collect();
            cells.entry(key).or_default()[ex.label(i).index()] += 1;
        }
        let mut entries: Vec<TableEntry> = cells
            .into_iter()
            .map(|(key, counts)| TableEntry { key, counts })
            .collect();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        DecisionTable {
            features,
            entries,
            default_class: Label::majority(ex.class_counts()),
            merit,
        }
    }

    pub fn predict(&self, row: &[u16]) -> Label {
        let key: Vec<u16> = self.features.iter().map(|&f| row[f]).collect();
        match self
            .entries
            .binary_search_by(|e| e.key.as_slice().cmp(&key))
        {
            Ok(i) => {
                let c = self.entries[i].counts;
                Label::majority([c[0] as usize, c[1] as usize])
            }
            Err(_) => self.default_class,
        }
    }
}
