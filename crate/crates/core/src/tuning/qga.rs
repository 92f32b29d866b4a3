use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    choose_indices, finite, Evaluation, Incumbent, Method, SearchSpace, TuneError, TuneResult,
};
use crate::learners::Hyperparams;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QgaConfig {
    pub population: usize,
    pub generations: usize,
    /// Rotation magnitude in radians.
    pub rotation_angle: f64,
    /// Stagnant generations before a disaster; `None` disables it.
    pub disaster_after: Option<usize>,
    pub disaster_fraction: f64,
}

impl Default for QgaConfig {
    fn default() -> Self {
        QgaConfig {
            population: 20,
            generations: 30,
            rotation_angle: 0.05 * PI,
            disaster_after: Some(5),
            disaster_fraction: 0.5,
        }
    }
}

impl QgaConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        if self.population < 2 {
            return Err(TuneError::Config(
                "QGA population must be at least 2".into(),
            ));
        }
        if self.generations < 1 {
            return Err(TuneError::Config(
                "QGA needs at least one generation".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.disaster_fraction) {
            return Err(TuneError::Config(
                "disaster_fraction must lie in [0, 1]".into(),
            ));
        }
        if !self.rotation_angle.is_finite() {
            return Err(TuneError::Config("rotation_angle must be finite".into()));
        }
        if self.disaster_after == Some(0) {
            return Err(TuneError::Config(
                "disaster_after must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Qubit amplitudes `(α, β)`; a bit observes as 1 with probability `β²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QChromosome {
    pub qubits: Vec<(f64, f64)>,
}

impl QChromosome {
    pub fn uniform(n: usize) -> Self {
        QChromosome {
            qubits: vec![(FRAC_1_SQRT_2, FRAC_1_SQRT_2); n],
        }
    }

    pub fn observe<R: Rng>(&self, rng: &mut R) -> Vec<bool> {
        self.qubits
            .iter()
            .map(|&(_, b)| rng.gen::<f64>() < b * b)
            .collect()
    }

    pub fn norm_error(&self) -> f64 {
        self.qubits
            .iter()
            .map(|&(a, b)| (a * a + b * b - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Rotates qubit `j` by `angle` toward observing `target`.
    pub fn rotate_toward(&mut self, j: usize, target: bool, angle: f64) {
        let (a, b) = self.qubits[j];
        // A positive rotation moves probability toward 1 when αβ > 0.
        let toward_one = a * b >= 0.0;
        let d = if toward_one == target { angle } else { -angle };
        let (s, c) = d.sin_cos();
        self.qubits[j] = (c * a - s * b, s * a + c * b);
    }
}

/// Population state between generations.
#[derive(Debug, Clone)]
pub struct Qga {
    pub config: QgaConfig,
    pub population: Vec<QChromosome>,
    pub best: Option<(f64, Vec<bool>)>,
    elite: usize,
    stagnant: usize,
    pub disasters: usize,
    pub max_norm_error: f64,
    rng: ChaCha8Rng,
}

impl Qga {
    pub fn new(bits: usize, config: QgaConfig, seed_value: u64) -> Result<Self, TuneError> {
        config.validate()?;
        Ok(Qga {
            population: vec![QChromosome::uniform(bits); config.population],
            config,
            best: None,
            elite: 0,
            stagnant: 0,
            disasters: 0,
            max_norm_error: 0.0,
            rng: seed::rng(seed_value),
        })
    }

    pub fn observe(&mut self) -> Vec<Vec<bool>> {
        let rng = &mut self.rng;
        self.population.iter().map(|q| q.observe(rng)).collect()
    }

    /// Rotation update and, after stagnation, a quantum disaster. Skipped
    /// candidates count as worse than the best. Returns whether the best
    /// fitness improved.
    pub fn update(&mut self, observed: &[Vec<bool>], fitness: &[Option<f64>]) -> bool {
        let mut improved = false;
        for (i, f) in fitness.iter().enumerate() {
            if let Some(v) = *f {
                if self.best.as_ref().is_none_or(|(b, _)| v > *b) {
                    self.best = Some((v, observed[i].clone()));
                    self.elite = i;
                    improved = true;
                }
            }
        }
        if let Some((bf, bbits)) = &self.best {
            for (i, q) in self.population.iter_mut().enumerate() {
                let worse = fitness[i].is_none_or(|v| v < *bf);
                if !worse {
                    continue;
                }
                for (j, (&x, &b)) in observed[i].iter().zip(bbits).enumerate() {
                    if x != b {
                        q.rotate_toward(j, b, self.config.rotation_angle);
                    }
                }
            }
        }
        self.stagnant = if improved { 0 } else { self.stagnant + 1 };
        if let Some(limit) = self.config.disaster_after {
            if self.stagnant >= limit {
                self.disaster();
                self.stagnant = 0;
            }
        }
        let err = self
            .population
            .iter()
            .map(QChromosome::norm_error)
            .fold(0.0, f64::max);
        self.max_norm_error = self.max_norm_error.max(err);
        improved
    }

    fn disaster(&mut self) {
        let n = self.population.len();
        let k = ((self.config.disaster_fraction * n as f64).round() as usize).min(n - 1);
        let others: Vec<usize> = (0..n).filter(|&i| i != self.elite).collect();
        let bits = self.population[0].qubits.len();
        for pick in choose_indices(&mut self.rng, others.len(), k) {
            self.population[others[pick]] = QChromosome::uniform(bits);
        }
        self.disasters += 1;
    }
}

fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Evolves a qubit population for `config.generations` generations and
/// returns the best decoded candidate. Fitness values are cached by
/// chromosome; evaluations inside a generation may run in parallel.
pub fn qga_tune<F>(
    space: &SearchSpace,
    fitness: F,
    config: &QgaConfig,
    seed_value: u64,
) -> Result<TuneResult, TuneError>
where
    F: Fn(&Hyperparams) -> f64 + Sync,
{
    let mut qga = Qga::new(space.bits(), config.clone(), seed_value)?;
    let generations = if space.bits() == 0 {
        1
    } else {
        config.generations
    };
    let mut cache: HashMap<Vec<bool>, Option<f64>> = HashMap::new();
    let mut inc = Incumbent::default();
    let mut log = Vec::new();
    let mut generation_best = Vec::with_capacity(generations);
    for g in 0..generations {
        let observed = qga.observe();
        let mut fresh: Vec<&Vec<bool>> = Vec::new();
        for o in &observed {
            if !cache.contains_key(o) && !fresh.contains(&o) {
                fresh.push(o);
            }
        }
        let scores: Vec<Option<f64>> = fresh
            .par_iter()
            .map(|b| finite(fitness(&space.decode(b))))
            .collect();
        for (b, s) in fresh.into_iter().zip(scores) {
            cache.insert(b.clone(), s);
        }
        let fit: Vec<Option<f64>> = observed.iter().map(|o| cache[o]).collect();
        for (i, (o, f)) in observed.iter().zip(&fit).enumerate() {
            let hp = space.decode(o);
            if let Some(v) = *f {
                inc.offer(v, &hp);
            }
            log.push(Evaluation {
                generation: g,
                index: i,
                bits: bit_string(o),
                hyperparams: hp,
                fitness: *f,
                best_so_far: inc.value(),
            });
        }
        qga.update(&observed, &fit);
        generation_best.push(inc.value().unwrap_or(f64::NEG_INFINITY));
        if space.bits() == 0 {
            break;
        }
    }
    let (best_fitness, best) = inc.best.ok_or(TuneError::NoFiniteFitness)?;
    Ok(TuneResult {
        method: Method::Qga,
        best,
        best_fitness,
        log,
        generation_best,
        max_norm_error: qga.max_norm_error,
    })
}
