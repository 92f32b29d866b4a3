//! Fully connected binary classifier: ReLU hidden layers, a sigmoid
//! output unit, binary cross-entropy loss and Adam updates.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::data::{Examples, Label};
use crate::scalar::Real;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams {
            hidden: vec![32, 16],
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 256,
            l2: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real + Serialize + serde::de::DeserializeOwned")]
pub struct Layer<F> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<F>,
    pub biases: Vec<F>,
}

impl<F: Real> Layer<F> {
    fn affine(&self, x: &[F], out: &mut Vec<F>) {
        out.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let s = w
                .iter()
                .zip(x)
                .fold(self.biases[o], |acc, (&a, &b)| acc + a * b);
            out.push(s);
        }
    }

    fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real + Serialize + serde::de::DeserializeOwned")]
pub struct Network<F> {
    pub layers: Vec<Layer<F>>,
    /// Per-feature `(min, 1/span)` mapping codes onto `[0, 1]`.
    pub input_scale: Vec<(F, F)>,
}

/// Adam moment estimates, laid out like [`Network::parameters`].
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub t: i32,
    pub learning_rate: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Real> Adam<F> {
    pub fn new(n: usize, params: &NetParams) -> Self {
        Adam {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            t: 0,
            learning_rate: F::lit(params.learning_rate),
            beta1: F::lit(params.beta1),
            beta2: F::lit(params.beta2),
            epsilon: F::lit(params.epsilon),
        }
    }
}

fn sigmoid<F: Real>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// `-[y ln s(z) + (1-y) ln(1-s(z))]` computed from the logit.
fn bce_with_logit<F: Real>(z: F, y: F) -> F {
    z.max(F::zero()) - z * y + (-z.abs()).exp().ln_1p()
}

impl<F: Real> Network<F> {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero, identity input scale.
    pub fn new<R: Rng>(inputs: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    weights: (0..w[0] * w[1])
                        .map(|_| F::lit(rng.gen_range(-bound..=bound)))
                        .collect(),
                    biases: vec![F::zero(); w[1]],
                }
            })
            .collect();
        Network {
            layers,
            input_scale: vec![(F::zero(), F::one()); inputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn parameters(&self) -> Vec<F> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[F]) {
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[k..k + nw]);
            k += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    /// Output logit for an already scaled input.
    pub fn logit(&self, x: &[F]) -> F {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            l.affine(&a, &mut z);
            if li < last {
                for v in z.iter_mut() {
                    *v = v.max(F::zero());
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        a[0]
    }

    pub fn output(&self, x: &[F]) -> F {
        sigmoid(self.logit(x))
    }

    pub fn scale_row(&self, row: &[u16], out: &mut Vec<F>) {
        out.clear();
        out.extend(
            row.iter()
                .zip(&self.input_scale)
                .map(|(&v, &(lo, inv))| (F::from_usize_lossy(usize::from(v)) - lo) * inv),
        );
    }

    pub fn predict_row(&self, row: &[u16]) -> Label {
        let mut x = Vec::with_capacity(row.len());
        self.scale_row(row, &mut x);
        Label::from_absent(self.logit(&x) > F::zero())
    }

    /// Mean cross-entropy over the batch plus `l2/2 * |W|^2`, and its
    /// gradient in [`Network::parameters`] layout. `xs` is row-major.
    pub fn loss_and_gradient(&self, xs: &[F], ys: &[F], l2: F) -> (F, Vec<F>) {
        let d = self.inputs();
        let n = ys.len();
        let inv_n = F::one() / F::from_usize_lossy(n);
        let depth = self.layers.len();
        let mut grad = vec![F::zero(); self.parameter_count()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.len();
                Some(o)
            })
            .collect();
        let mut loss = F::zero();
        let mut acts: Vec<Vec<F>> = vec![Vec::new(); depth + 1];
        let mut delta = Vec::new();
        let mut back = Vec::new();
        for (s, &y) in ys.iter().enumerate() {
            acts[0].clear();
            acts[0].extend_from_slice(&xs[s * d..(s + 1) * d]);
            for li in 0..depth {
                let (lo, hi) = acts.split_at_mut(li + 1);
                self.layers[li].affine(&lo[li], &mut hi[0]);
                if li + 1 < depth {
                    for v in hi[0].iter_mut() {
                        *v = v.max(F::zero());
                    }
                }
            }
            let z = acts[depth][0];
            loss = loss + bce_with_logit(z, y);
            delta.clear();
            delta.push((sigmoid(z) - y) * inv_n);
            for li in (0..depth).rev() {
                let l = &self.layers[li];
                let a = &acts[li];
                let g = &mut grad[offsets[li]..offsets[li] + l.len()];
                let (gw, gb) = g.split_at_mut(l.weights.len());
                for (o, &dl) in delta.iter().enumerate() {
                    gb[o] = gb[o] + dl;
                    let row = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                    for (gi, &ai) in row.iter_mut().zip(a) {
                        *gi = *gi + dl * ai;
                    }
                }
                if li > 0 {
                    back.clear();
                    back.resize(l.inputs, F::zero());
                    for (o, &dl) in delta.iter().enumerate() {
                        let w = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                        for (b, &wi) in back.iter_mut().zip(w) {
                            *b = *b + wi * dl;
                        }
                    }
                    // ReLU derivative; a positive activation means a positive pre-activation.
                    for (b, &ai) in back.iter_mut().zip(a) {
                        if ai <= F::zero() {
                            *b = F::zero();
                        }
                    }
                    std::mem::swap(&mut delta, &mut back);
                }
            }
        }
        loss = loss * inv_n;
        if l2 > F::zero() {
            let half = F::lit(0.5);
            for (li, l) in self.layers.iter().enumerate() {
                for (k, &w) in l.weights.iter().enumerate() {
                    loss = loss + half * l2 * w * w;
                    grad[offsets[li] + k] = grad[offsets[li] + k] + l2 * w;
                }
            }
        }
        (loss, grad)
    }

    /// One Adam step on the batch; returns the batch loss before the step.
    pub fn backprop_step(
        &mut self,
        adam: &mut Adam<F>,
        xs: &[F],
        ys: &[F],
        l2: F,
    ) -> Result<F, LearnerError> {
        if ys.is_empty() {
            return Err(LearnerError::Empty);
        }
        let (loss, grad) = self.loss_and_gradient(xs, ys, l2);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LearnerError::Diverged(format!(
                "non-finite loss; lower learning_rate (currently {})",
                adam.learning_rate
            )));
        }
        adam.t += 1;
        let b1t = F::one() - adam.beta1.powi(adam.t);
        let b2t = F::one() - adam.beta2.powi(adam.t);
        let mut p = self.parameters();
        for (k, (&g, w)) in grad.iter().zip(p.iter_mut()).enumerate() {
            adam.m[k] = adam.beta1 * adam.m[k] + (F::one() - adam.beta1) * g;
            adam.v[k] = adam.beta2 * adam.v[k] + (F::one() - adam.beta2) * g * g;
            let mh = adam.m[k] / b1t;
            let vh = adam.v[k] / b2t;
            *w = *w - adam.learning_rate * mh / (vh.sqrt() + adam.epsilon);
        }
        self.set_parameters(&p);
        Ok(loss)
    }

    /// Mini-batch training with a fixed per-seed shuffle each epoch.
    pub fn train(ex: &Examples, params: &NetParams, seed_value: u64) -> Result<Self, LearnerError> {
        if ex.is_empty() {
            return Err(LearnerError::Empty);
        }
        let d = ex.n_features();
        let mut init = seed::rng_for(seed_value, "net/init");
        let mut net = Network::<F>::new(d, &params.hidden, &mut init);
        net.input_scale = ex
            .schema()
            .iter()
            .map(|s| {
                let span = f64::from(s.max - s.min).max(1.0);
                (F::lit(f64::from(s.min)), F::lit(1.0 / span))
            })
            .collect();
        let mut xs = Vec::with_capacity(ex.len() * d);
        let mut buf = Vec::with_capacity(d);
        for i in 0..ex.len() {
            net.scale_row(ex.row(i), &mut buf);
            xs.extend_from_slice(&buf);
        }
        let ys: Vec<F> = ex
            .labels()
            .iter()
            .map(|l| F::from_usize_lossy(l.index()))
            .collect();
        let mut adam = Adam::new(net.parameter_count(), params);
        let l2 = F::lit(params.l2);
        let mut order: Vec<usize> = (0..ex.len()).collect();
        let mut shuffle = seed::rng_for(seed_value, "net/shuffle");
        let bs = params.batch_size.max(1);
        let mut bx = Vec::with_capacity(bs * d);
        let mut by = Vec::with_capacity(bs);
        for _ in 0..params.epochs {
            order.shuffle(&mut shuffle);
            for chunk in order.chunks(bs) {
                bx.clear();
                by.clear();
                for &i in chunk {
                    bx.extend_from_slice(&xs[i * d..(i + 1) * d]);
                    by.push(ys[i]);
                }
                net.backprop_step(&mut adam, &bx, &by, l2)?;
            }
        }
        Ok(net)
    }
}
