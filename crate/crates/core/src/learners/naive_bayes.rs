//! Naive Bayes with Laplace-smoothed Bernoulli likelihoods for binary
//! features and Gaussian kernel density estimates for numeric ones.

use serde::{Deserialize, Serialize};

use crate::data::{Examples, FeatureKind, Label};
use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR/1.34) n^(-1/5)`
    Silverman,
    /// `1.06 sd n^(-1/5)`
    Scott,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesParams {
    pub bandwidth: Bandwidth,
    pub bandwidth_scale: f64,
    /// Smallest admissible bandwidth, in feature code units.
    pub min_bandwidth: f64,
}

impl Default for BayesParams {
    fn default() -> Self {
        BayesParams {
            bandwidth: Bandwidth::Silverman,
            bandwidth_scale: 1.0,
            min_bandwidth: 0.25,
        }
    }
}

/// Per-class, per-feature likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real + Serialize + serde::de::DeserializeOwned")]
pub enum Likelihood<F> {
    /// Log-probabilities of each code value.
    Discrete { log_p: Vec<F> },
    /// Gaussian KDE over distinct training values with multiplicities.
    Kernel {
        values: Vec<F>,
        log_weights: Vec<F>,
        bandwidth: F,
    },
}

impl<F: Real> Likelihood<F> {
    fn log_density(&self, x: F, scratch: &mut Vec<F>) -> F {
        match self {
            Likelihood::Discrete { log_p } => log_p[x.to_usize().unwrap_or(0).min(log_p.len() - 1)],
            Likelihood::Kernel {
                values,
                log_weights,
                bandwidth,
            } => {
                let half = F::lit(0.5);
                scratch.clear();
                scratch.extend(values.iter().zip(log_weights).map(|(&v, &w)| {
                    let z = (x - v) / *bandwidth;
                    w - half * z * z
                }));
                let norm = (*bandwidth * F::lit((2.0 * std::f64::consts::PI).sqrt())).ln();
                log_sum_exp(scratch) - norm
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real + Serialize + serde::de::DeserializeOwned")]
pub struct KdeNaiveBayes<F> {
    pub log_prior: [F; 2],
    /// Indexed `[class][feature]`.
    pub likelihoods: [Vec<Likelihood<F>>; 2],
    /// Feature code minimum, subtracted before lookup.
    pub offsets: Vec<u16>,
}

fn quantile(sorted: &[(f64, usize)], n: usize, q: f64) -> f64 {
    // Linear interpolation between order statistics of the expanded sample.
    let pos = q * (n - 1) as f64;
    let at = |k: usize| {
        let mut acc = 0;
        for &(v, c) in sorted {
            acc += c;
            if k < acc {
                return v;
            }
        }
        sorted.last().map_or(0.0, |p| p.0)
    };
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    at(lo) * (1.0 - frac) + at(hi) * frac
}

/// Rule-of-thumb bandwidth for a sample given as `(value, multiplicity)`.
pub fn bandwidth(sample: &[(f64, usize)], params: &BayesParams) -> f64 {
    let n: usize = sample.iter().map(|p| p.1).sum();
    if n < 2 {
        return params.min_bandwidth;
    }
    let nf = n as f64;
    let mean = sample.iter().map(|&(v, c)| v * c as f64).sum::<f64>() / nf;
    let var = sample
        .iter()
        .map(|&(v, c)| (v - mean).powi(2) * c as f64)
        .sum::<f64>()
        / (nf - 1.0);
    let sd = var.sqrt();
    let h = match params.bandwidth {
        Bandwidth::Scott => 1.06 * sd * nf.powf(-0.2),
        Bandwidth::Silverman => {
            let iqr = quantile(sample, n, 0.75) - quantile(sample, n, 0.25);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * nf.powf(-0.2)
        }
    };
    (h * params.bandwidth_scale).max(params.min_bandwidth)
}

impl<F: Real> KdeNaiveBayes<F> {
    /// Requires both classes to be present in `ex`.
    pub fn fit(ex: &Examples, params: &BayesParams) -> Self {
        let counts = ex.class_counts();
        let n = ex.len() as f64;
        let log_prior = [
            F::lit((counts[0] as f64 / n).ln()),
            F::lit((counts[1] as f64 / n).ln()),
        ];
        let mut likelihoods: [Vec<Likelihood<F>>; 2] = [Vec::new(), Vec::new()];
        for (f, spec) in ex.schema().iter().enumerate() {
            let card = spec.cardinality();
            let mut hist = vec![[0usize; 2]; card];
            for i in 0..ex.len() {
                hist[usize::from(ex.value(i, f) - spec.min)][ex.label(i).index()] += 1;
            }
            for (y, out) in likelihoods.iter_mut().enumerate() {
                let total = counts[y];
                let lk = match spec.kind {
                    FeatureKind::Binary => {
                        let denom = (total + card) as f64;
                        Likelihood::Discrete {
                            log_p: hist
                                .iter()
                                .map(|c| F::lit(((c[y] + 1) as f64 / denom).ln()))
                                .collect(),
                        }
                    }
                    FeatureKind::Numeric => {
                        let sample: Vec<(f64, usize)> = hist
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| c[y] > 0)
                            .map(|(v, c)| (v as f64, c[y]))
                            .collect();
                        let h = bandwidth(&sample, params);
                        Likelihood::Kernel {
                            values: sample.iter().map(|p| F::lit(p.0)).collect(),
                            log_weights: sample
                                .iter()
                                .map(|p| F::lit((p.1 as f64 / total as f64).ln()))
                                .collect(),
                            bandwidth: F::lit(h),
                        }
                    }
                };
                out.push(lk);
            }
        }
        KdeNaiveBayes {
            log_prior,
            likelihoods,
            offsets: ex.schema().iter().map(|s| s.min).collect(),
        }
    }

    /// Unnormalized log joint `ln p(y) + Σ ln p(x_f | y)` per class.
    pub fn log_joint(&self, row: &[u16]) -> [F; 2] {
        let mut scratch = Vec::new();
        let mut out = self.log_prior;
        for (y, o) in out.iter_mut().enumerate() {
            for (f, lk) in self.likelihoods[y].iter().enumerate() {
                let x = F::from_usize_lossy(usize::from(row[f] - self.offsets[f]));
                *o = *o + lk.log_density(x, &mut scratch);
            }
        }
        out
    }

    /// Posterior `[P(present), P(absent)]`.
    pub fn predict_proba(&self, row: &[u16]) -> [F; 2] {
        let lj = self.log_joint(row);
        let z = log_sum_exp(&lj);
        [(lj[0] - z).exp(), (lj[1] - z).exp()]
    }

    pub fn predict(&self, row: &[u16]) -> Label {
        let lj = self.log_joint(row);
        Label::from_absent(lj[1] > lj[0])
    }
}
