use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TuneError;
use crate::learners::{HpValue, Hyperparams, LearnerKind};

/// Bits per real-valued (or log-scaled integer) hyperparameter.
pub const REAL_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Choice(Vec<HpValue>),
    Int { lo: i64, hi: i64, scale: Scale },
    Real { lo: f64, hi: f64, scale: Scale },
}

/// Config-file form of one domain, e.g. `{ real = [1e-4, 0.1], scale = "log" }`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<Vec<HpValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub int: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: Domain,
    pub bits: u32,
}

fn bits_for(count: u64) -> u32 {
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros()
    }
}

fn lerp(lo: f64, hi: f64, t: f64, scale: Scale) -> f64 {
    match scale {
        Scale::Linear => lo + (hi - lo) * t,
        Scale::Log => (lo.ln() + (hi.ln() - lo.ln()) * t).exp(),
    }
}

impl ParamSpec {
    pub fn new(name: &str, domain: Domain) -> Result<Self, TuneError> {
        let bits = match &domain {
            Domain::Choice(v) => bits_for(v.len() as u64),
            Domain::Int {
                lo,
                hi,
                scale: Scale::Linear,
            } => bits_for((hi - lo + 1).max(0) as u64),
            Domain::Int { lo, hi, .. } => {
                if lo == hi {
                    0
                } else {
                    REAL_BITS
                }
            }
            Domain::Real { lo, hi, .. } => {
                if lo == hi {
                    0
                } else {
                    REAL_BITS
                }
            }
        };
        let p = ParamSpec {
            name: name.to_string(),
            domain,
            bits,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bits(mut self, bits: u32) -> Result<Self, TuneError> {
        if !(1..=32).contains(&bits) {
            return Err(TuneError::Space(format!(
                "`{}`: bits must be in 1..=32",
                self.name
            )));
        }
        if matches!(
            self.domain,
            Domain::Real { .. }
                | Domain::Int {
                    scale: Scale::Log,
                    ..
                }
        ) && self.bits > 0
        {
            self.bits = bits;
        }
        Ok(self)
    }

    fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: &str| Err(TuneError::Space(format!("`{}`: {m}", self.name)));
        match &self.domain {
            Domain::Choice(v) if v.is_empty() => bad("empty choice set"),
            Domain::Int { lo, hi, .. } if lo > hi => bad("empty integer range"),
            Domain::Int {
                lo,
                scale: Scale::Log,
                ..
            } if *lo < 1 => bad("log scale needs a positive range"),
            Domain::Real { lo, hi, .. } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                bad("empty real range")
            }
            Domain::Real {
                lo,
                scale: Scale::Log,
                ..
            } if *lo <= 0.0 => bad("log scale needs a positive range"),
            _ => Ok(()),
        }
    }

    /// Maps a `bits`-wide code into the domain. Codes past the last
    /// integer or choice are clamped to it.
    pub fn decode(&self, code: u64) -> HpValue {
        let top = if self.bits == 0 {
            0
        } else {
            (1u64 << self.bits) - 1
        };
        let t = if top == 0 {
            0.0
        } else {
            code.min(top) as f64 / top as f64
        };
        match &self.domain {
            Domain::Choice(v) => v[(code as usize).min(v.len() - 1)].clone(),
            Domain::Int {
                lo,
                hi,
                scale: Scale::Linear,
            } => HpValue::Int(lo + (code.min((hi - lo) as u64)) as i64),
            Domain::Int { lo, hi, scale } => HpValue::Int(
                (lerp(*lo as f64, *hi as f64, t, *scale).round() as i64).clamp(*lo, *hi),
            ),
            Domain::Real { lo, hi, scale } => {
                HpValue::Real(lerp(*lo, *hi, t, *scale).clamp(*lo, *hi))
            }
        }
    }

    /// Uniform draw on the declared scale.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> HpValue {
        match &self.domain {
            Domain::Choice(v) => v[rng.gen_range(0..v.len())].clone(),
            Domain::Int {
                lo,
                hi,
                scale: Scale::Linear,
            } => HpValue::Int(rng.gen_range(*lo..=*hi)),
            Domain::Int { lo, hi, scale } => {
                let x = lerp(*lo as f64 - 0.5, *hi as f64 + 0.5, rng.gen::<f64>(), *scale);
                HpValue::Int((x.round() as i64).clamp(*lo, *hi))
            }
            Domain::Real { lo, hi, scale } => {
                HpValue::Real(lerp(*lo, *hi, rng.gen::<f64>(), *scale).clamp(*lo, *hi))
            }
        }
    }

    fn from_spec(name: &str, s: &DomainSpec) -> Result<Self, TuneError> {
        let scale = s.scale.unwrap_or_default();
        let domain = match (&s.choice, s.int, s.real) {
            (Some(c), None, None) => Domain::Choice(c.clone()),
            (None, Some([lo, hi]), None) => Domain::Int { lo, hi, scale },
            (None, None, Some([lo, hi])) => Domain::Real { lo, hi, scale },
            _ => {
                return Err(TuneError::Space(format!(
                    "`{name}`: give exactly one of `choice`, `int`, `real`"
                )))
            }
        };
        let p = ParamSpec::new(name, domain)?;
        match s.bits {
            Some(b) => p.with_bits(b),
            None => Ok(p),
        }
    }

    fn to_spec(&self) -> DomainSpec {
        let mut s = DomainSpec::default();
        match &self.domain {
            Domain::Choice(v) => s.choice = Some(v.clone()),
            Domain::Int { lo, hi, scale } => {
                s.int = Some([*lo, *hi]);
                s.scale = (*scale == Scale::Log).then_some(Scale::Log);
            }
            Domain::Real { lo, hi, scale } => {
                s.real = Some([*lo, *hi]);
                s.scale = (*scale == Scale::Log).then_some(Scale::Log);
            }
        }
        s
    }
}

/// Ordered set of hyperparameter domains; chromosome bits are laid out in
/// parameter order, most significant bit first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Self {
        SearchSpace { params }
    }

    pub fn bits(&self) -> usize {
        self.params.iter().map(|p| p.bits as usize).sum()
    }

    pub fn decode(&self, bits: &[bool]) -> Hyperparams {
        let mut hp = Hyperparams::new();
        let mut k = 0;
        for p in &self.params {
            let code = bits[k..k + p.bits as usize]
                .iter()
                .fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
            k += p.bits as usize;
            hp.insert(&p.name, p.decode(code));
        }
        hp
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Hyperparams {
        let mut hp = Hyperparams::new();
        for p in &self.params {
            hp.insert(&p.name, p.sample(rng));
        }
        hp
    }

    pub fn from_specs(specs: &BTreeMap<String, DomainSpec>) -> Result<Self, TuneError> {
        specs
            .iter()
            .map(|(n, s)| ParamSpec::from_spec(n, s))
            .collect::<Result<Vec<_>, _>>()
            .map(SearchSpace::new)
    }

    pub fn to_specs(&self) -> BTreeMap<String, DomainSpec> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.to_spec()))
            .collect()
    }

    /// Built-in space for a learner kind.
    pub fn default_for(kind: LearnerKind) -> SearchSpace {
        let int = |n: &str, lo, hi| {
            ParamSpec::new(
                n,
                Domain::Int {
                    lo,
                    hi,
                    scale: Scale::Linear,
                },
            )
            .unwrap()
        };
        let real =
            |n: &str, lo, hi, scale| ParamSpec::new(n, Domain::Real { lo, hi, scale }).unwrap();
        let choice = |n: &str, v: &[&str]| {
            ParamSpec::new(
                n,
                Domain::Choice(v.iter().map(|s| HpValue::Text(s.to_string())).collect()),
            )
            .unwrap()
        };
        let batch = || {
            ParamSpec::new(
                "batch_size",
                Domain::Choice([32, 64, 128, 256].map(HpValue::Int).to_vec()),
            )
            .unwrap()
        };
        let params = match kind {
            LearnerKind::DecisionTable => vec![int("stale_limit", 1, 8)],
            LearnerKind::C45 => vec![
                real("pruning_confidence", 0.05, 0.5, Scale::Linear),
                int("min_leaf", 1, 32),
                choice("criterion", &["info_gain", "gain_ratio"]),
            ],
            LearnerKind::RandomForest => vec![
                ParamSpec::new(
                    "tree_count",
                    Domain::Int {
                        lo: 10,
                        hi: 150,
                        scale: Scale::Log,
                    },
                )
                .unwrap(),
                int("feature_subset_size", 1, 8),
                int("min_leaf", 1, 16),
            ],
            LearnerKind::NaiveBayes => vec![
                choice("bandwidth_mode", &["silverman", "scott"]),
                real("bandwidth_scale", 0.25, 4.0, Scale::Log),
            ],
            LearnerKind::Mlp => vec![
                int("hidden_layers", 1, 8),
                int("hidden_units", 4, 64),
                real("learning_rate", 1e-4, 3e-2, Scale::Log),
                int("epochs", 10, 60),
                batch(),
            ],
            LearnerKind::DeepNet => vec![
                int("hidden_layers", 3, 32),
                int("hidden_units", 8, 64),
                real("learning_rate", 1e-4, 1e-2, Scale::Log),
                int("epochs", 10, 60),
                batch(),
            ],
        };
        SearchSpace::new(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_widths() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(5), 3);
        assert_eq!(bits_for(256), 8);
        assert_eq!(bits_for(257), 9);
        let p = ParamSpec::new(
            "x",
            Domain::Int {
                lo: 1,
                hi: 5,
                scale: Scale::Linear,
            },
        )
        .unwrap();
        assert_eq!(p.bits, 3);
        assert_eq!(p.decode(7), HpValue::Int(5));
        assert_eq!(p.decode(0), HpValue::Int(1));
    }

    #[test]
    fn empty_domains_are_rejected() {
        assert!(ParamSpec::new("c", Domain::Choice(vec![])).is_err());
        assert!(ParamSpec::new(
            "i",
            Domain::Int {
                lo: 3,
                hi: 2,
                scale: Scale::Linear
            }
        )
        .is_err());
        assert!(ParamSpec::new(
            "r",
            Domain::Real {
                lo: 0.0,
                hi: 1.0,
                scale: Scale::Log
            }
        )
        .is_err());
    }

    #[test]
    fn toml_specs_round_trip() {
        let text = r#"
            learning_rate = { real = [1e-4, 0.1], scale = "log" }
            layers = { int = [1, 10] }
            mode = { choice = ["silverman", "scott"] }
        "#;
        let specs: BTreeMap<String, DomainSpec> = toml::from_str(text).unwrap();
        let space = SearchSpace::from_specs(&specs).unwrap();
        assert_eq!(space.bits(), 8 + 4 + 1);
        assert_eq!(SearchSpace::from_specs(&space.to_specs()).unwrap(), space);
        let bad: BTreeMap<String, DomainSpec> =
            toml::from_str("x = { int = [1, 2], real = [0.0, 1.0] }").unwrap();
        assert!(SearchSpace::from_specs(&bad).is_err());
    }

    #[test]
    fn default_spaces_validate_against_learners() {
        let mut rng = crate::seed::rng(4);
        for kind in LearnerKind::ALL {
            let space = SearchSpace::default_for(kind);
            for _ in 0..20 {
                let hp = space.sample(&mut rng);
                crate::learners::params_for(kind, &hp).unwrap();
            }
            let ones = vec![true; space.bits()];
            crate::learners::params_for(kind, &space.decode(&ones)).unwrap();
        }
    }

    fn in_domain(p: &ParamSpec, v: &HpValue) -> bool {
        match (&p.domain, v) {
            (Domain::Choice(c), v) => c.contains(v),
            (Domain::Int { lo, hi, .. }, HpValue::Int(i)) => lo <= i && i <= hi,
            (Domain::Real { lo, hi, .. }, HpValue::Real(x)) => lo <= x && x <= hi,
            _ => false,
        }
    }

    proptest! {
        #[test]
        fn decoding_is_total(lo in -50i64..50, span in 0i64..300, rlo in 1e-3f64..10.0, rspan in 0.0f64..100.0, n in 1usize..9, code in any::<u64>()) {
            let specs = [
                ParamSpec::new("i", Domain::Int { lo, hi: lo + span, scale: Scale::Linear }).unwrap(),
                ParamSpec::new("r", Domain::Real { lo: rlo, hi: rlo + rspan, scale: Scale::Log }).unwrap(),
                ParamSpec::new("c", Domain::Choice((0..n as i64).map(HpValue::Int).collect())).unwrap(),
                ParamSpec::new("l", Domain::Int { lo: 1, hi: 1 + span, scale: Scale::Log }).unwrap(),
            ];
            for p in &specs {
                let c = if p.bits == 0 { 0 } else { code & ((1u64 << p.bits) - 1) };
                prop_assert!(in_domain(p, &p.decode(c)));
            }
        }
    }
}
