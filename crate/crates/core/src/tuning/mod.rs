//! Hyperparameter search: a quantum-inspired genetic algorithm with
//! quantum disaster, and plain randomized search.

pub mod qga;
pub mod space;

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::Hyperparams;
use crate::seed;
pub use qga::{qga_tune, QChromosome, Qga, QgaConfig};
pub use space::{Domain, DomainSpec, ParamSpec, Scale, SearchSpace};

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("search space: {0}")]
    Space(String),
    #[error("invalid tuner setting: {0}")]
    Config(String),
    #[error("no candidate produced a finite fitness")]
    NoFiniteFitness,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Qga,
    RandomSearch,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Qga => "qga",
            Method::RandomSearch => "random_search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub generation: usize,
    pub index: usize,
    /// Observed chromosome, empty for random search.
    pub bits: String,
    pub hyperparams: Hyperparams,
    /// `None` when the fitness was not finite and the candidate was skipped.
    pub fitness: Option<f64>,
    pub best_so_far: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub method: Method,
    pub best: Hyperparams,
    pub best_fitness: f64,
    pub log: Vec<Evaluation>,
    /// Best fitness seen up to the end of each generation.
    pub generation_best: Vec<f64>,
    /// Largest `|α² + β² - 1|` seen across all qubit updates.
    pub max_norm_error: f64,
}

pub const TUNE_LOG_HEADER: &str = "generation,index,bits,fitness,best_so_far,hyperparams";

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "skipped".to_string(), |v| format!("{v}"))
}

impl TuneResult {
    pub fn write_log_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TUNE_LOG_HEADER}")?;
        for e in &self.log {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.generation,
                e.index,
                e.bits,
                fmt_opt(e.fitness),
                e.best_so_far.map_or_else(String::new, |v| format!("{v}")),
                e.hyperparams
            )?;
        }
        Ok(())
    }
}

/// Tracks the running best with a strict improvement rule, so ties keep
/// the earliest candidate.
#[derive(Debug, Clone, Default)]
pub(crate) struct Incumbent {
    pub best: Option<(f64, Hyperparams)>,
}

impl Incumbent {
    pub fn offer(&mut self, fitness: f64, hp: &Hyperparams) -> bool {
        if self.best.as_ref().is_none_or(|(b, _)| fitness > *b) {
            self.best = Some((fitness, hp.clone()));
            true
        } else {
            false
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.0)
    }
}

pub(crate) fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Draws `n` independent candidates and keeps the best; ties go to the
/// earliest draw. Evaluations may run in parallel.
pub fn random_search<F>(
    space: &SearchSpace,
    fitness: F,
    n: usize,
    seed_value: u64,
) -> Result<TuneResult, TuneError>
where
    F: Fn(&Hyperparams) -> f64 + Sync,
{
    if n == 0 {
        return Err(TuneError::Config("random search needs N >= 1".into()));
    }
    let mut rng = seed::rng(seed_value);
    let candidates: Vec<Hyperparams> = (0..n).map(|_| space.sample(&mut rng)).collect();
    let scores: Vec<Option<f64>> = candidates.par_iter().map(|c| finite(fitness(c))).collect();
    let mut inc = Incumbent::default();
    let mut log = Vec::with_capacity(n);
    for (i, (c, s)) in candidates.into_iter().zip(scores).enumerate() {
        if let Some(v) = s {
            inc.offer(v, &c);
        }
        log.push(Evaluation {
            generation: 0,
            index: i,
            bits: String::new(),
            hyperparams: c,
            fitness: s,
            best_so_far: inc.value(),
        });
    }
    let (best_fitness, best) = inc.best.ok_or(TuneError::NoFiniteFitness)?;
    Ok(TuneResult {
        method: Method::RandomSearch,
        best,
        best_fitness,
        log,
        generation_best: vec![best_fitness],
        max_norm_error: 0.0,
    })
}

/// Uniform index in `0..n` without replacement, `k` of them, sorted.
pub(crate) fn choose_indices<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut v = rand::seq::index::sample(rng, n, k.min(n)).into_vec();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::HpValue;

    fn x_space() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::new(
            "x",
            Domain::Int {
                lo: 0,
                hi: 10,
                scale: Scale::Linear,
            },
        )
        .unwrap()])
    }

    fn x(hp: &Hyperparams) -> f64 {
        match hp.get("x") {
            Some(HpValue::Int(i)) => *i as f64,
            _ => f64::NAN,
        }
    }

    #[test]
    fn single_draw_is_best() {
        let r = random_search(&x_space(), x, 1, 3).unwrap();
        assert_eq!(r.log.len(), 1);
        assert_eq!(r.best, r.log[0].hyperparams);
    }

    #[test]
    fn constant_fitness_keeps_first_draw() {
        let r = random_search(&x_space(), |_| 1.0, 50, 8).unwrap();
        assert_eq!(r.best, r.log[0].hyperparams);
    }

    #[test]
    fn quadratic_optimum_found() {
        for seed in 0..20 {
            let r = random_search(&x_space(), |h| -(x(h) - 3.0).powi(2), 200, seed).unwrap();
            assert_eq!(r.best.get("x"), Some(&HpValue::Int(3)));
        }
    }

    #[test]
    fn non_finite_fitness_is_skipped() {
        let r = random_search(
            &x_space(),
            |h| if x(h) > 5.0 { f64::NAN } else { x(h) },
            100,
            1,
        )
        .unwrap();
        assert!(r.log.iter().any(|e| e.fitness.is_none()));
        assert_eq!(r.best_fitness, 5.0);
        assert!(matches!(
            random_search(&x_space(), |_| f64::INFINITY, 5, 1),
            Err(TuneError::NoFiniteFitness)
        ));
        assert!(random_search(&x_space(), x, 0, 1).is_err());
    }
}
