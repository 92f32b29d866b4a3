use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LearnerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    List(Vec<i64>),
}

impl fmt::Display for HpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HpValue::Bool(b) => write!(f, "{b}"),
            HpValue::Int(i) => write!(f, "{i}"),
            HpValue::Real(x) => write!(f, "{x}"),
            HpValue::Text(s) => write!(f, "{s}"),
            HpValue::List(v) => {
                let parts: Vec<String> = v.iter().map(i64::to_string).collect();
                write!(f, "[{}]", parts.join(" "))
            }
        }
    }
}

/// Name/value hyperparameter map. Unknown names are rejected when a
/// learner reads the map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperparams(BTreeMap<String, HpValue>);

impl Hyperparams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: HpValue) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn insert(&mut self, name: &str, value: HpValue) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&HpValue> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &HpValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// Typed, range-checked access to a [`Hyperparams`] map.
pub(crate) struct HpReader<'a> {
    hp: &'a Hyperparams,
    seen: BTreeSet<&'static str>,
}

impl<'a> HpReader<'a> {
    pub fn new(hp: &'a Hyperparams) -> Self {
        HpReader {
            hp,
            seen: BTreeSet::new(),
        }
    }

    fn schema<T>(msg: String) -> Result<T, LearnerError> {
        Err(LearnerError::Schema(msg))
    }

    pub fn int(
        &mut self,
        name: &'static str,
        default: i64,
        lo: i64,
        hi: i64,
    ) -> Result<i64, LearnerError> {
        self.seen.insert(name);
        let v = match self.hp.get(name) {
            None => default,
            Some(HpValue::Int(i)) => *i,
            Some(HpValue::Real(x)) if x.fract() == 0.0 => *x as i64,
            Some(other) => {
                return Self::schema(format!("`{name}` must be an integer, got {other}"))
            }
        };
        if v < lo || v > hi {
            return Self::schema(format!("`{name}` = {v} outside [{lo}, {hi}]"));
        }
        Ok(v)
    }

    pub fn real(
        &mut self,
        name: &'static str,
        default: f64,
        lo: f64,
        hi: f64,
    ) -> Result<f64, LearnerError> {
        self.seen.insert(name);
        let v = match self.hp.get(name) {
            None => default,
            Some(HpValue::Real(x)) => *x,
            Some(HpValue::Int(i)) => *i as f64,
            Some(other) => return Self::schema(format!("`{name}` must be a number, got {other}")),
        };
        if !(v.is_finite() && v >= lo && v <= hi) {
            return Self::schema(format!("`{name}` = {v} outside [{lo}, {hi}]"));
        }
        Ok(v)
    }

    pub fn boolean(&mut self, name: &'static str, default: bool) -> Result<bool, LearnerError> {
        self.seen.insert(name);
        match self.hp.get(name) {
            None => Ok(default),
            Some(HpValue::Bool(b)) => Ok(*b),
            Some(HpValue::Text(s)) if s == "true" || s == "false" => Ok(s == "true"),
            Some(other) => Self::schema(format!("`{name}` must be a boolean, got {other}")),
        }
    }

    pub fn choice(
        &mut self,
        name: &'static str,
        default: &'static str,
        options: &[&'static str],
    ) -> Result<&'static str, LearnerError> {
        self.seen.insert(name);
        match self.hp.get(name) {
            None => Ok(default),
            Some(HpValue::Text(s)) => options
                .iter()
                .find(|o| **o == s.as_str())
                .copied()
                .ok_or_else(|| {
                    LearnerError::Schema(format!("`{name}` = {s} is not one of {options:?}"))
                }),
            Some(other) => {
                Self::schema(format!("`{name}` must be one of {options:?}, got {other}"))
            }
        }
    }

    pub fn list(&mut self, name: &'static str) -> Result<Option<Vec<i64>>, LearnerError> {
        self.seen.insert(name);
        match self.hp.get(name) {
            None => Ok(None),
            Some(HpValue::List(v)) => Ok(Some(v.clone())),
            Some(HpValue::Int(i)) => Ok(Some(vec![*i])),
            Some(other) => {
                Self::schema(format!("`{name}` must be a list of integers, got {other}"))
            }
        }
    }

    pub fn finish(self) -> Result<(), LearnerError> {
        let unknown: Vec<&str> = self
            .hp
            .iter()
            .map(|(k, _)| k)
            .filter(|k| !self.seen.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Self::schema(format!("unknown hyperparameters {unknown:?}"))
        }
    }
}
