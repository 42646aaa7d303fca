//! Fully connected ReLU network trained with Adam on mean squared error.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_pair;
use super::model::{ModelKind, Net, TrainedModel};
use super::standardize::Standardizer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub adam: AdamParams,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: vec![256; 3], adam: AdamParams::default(), epochs: 1500, batch_size: 100, seed: 0 }
    }
}

/// `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

fn relu(z: &mut Array2<f64>) {
    z.mapv_inplace(|v| v.max(0.0));
}

impl Mlp {
    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].w.nrows()];
        w.extend(self.layers.iter().map(|l| l.w.ncols()));
        w
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Mlp {
            layers: widths
                .windows(2)
                .map(|p| Dense { w: Array2::zeros((p[0], p[1])), b: Array1::zeros(p[1]) })
                .collect(),
        }
    }

    /// Uniform weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn he_uniform(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut m = Self::zeros(widths);
        for l in &mut m.layers {
            let lim = (6.0 / l.w.nrows() as f64).sqrt();
            l.w.mapv_inplace(|_| rng.random_range(-lim..lim));
        }
        m
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            a = a.dot(&l.w) + &l.b;
            if i < last {
                relu(&mut a);
            }
        }
        a
    }

    /// Mean of squared errors over all samples and outputs.
    pub fn loss(&self, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        let d = self.forward(x) - y;
        d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64
    }

    /// Loss and its gradient, one `Dense` of partial derivatives per layer.
    pub fn loss_and_grad(&self, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Vec<Dense>) {
        let last = self.layers.len() - 1;
        let mut acts = vec![x.clone()];
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&l.w) + &l.b;
            if i < last {
                relu(&mut z);
            }
            acts.push(z);
        }
        let diff = &acts[last + 1] - y;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64;
        let mut delta = diff * (2.0 / y.len() as f64);
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..=last).rev() {
            let gw = acts[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].w.t());
                // ReLU derivative from the stored post-activation.
                ndarray::Zip::from(&mut back).and(&acts[i]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense { w: gw, b: gb });
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        let mut it = p.iter();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = *it.next().expect("parameter vector too short");
            }
        }
    }
}

struct Adam {
    p: AdamParams,
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl Adam {
    fn new(p: AdamParams, net: &Mlp) -> Self {
        let zero =
            || net.layers.iter().map(|l| Dense { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.dim()) }).collect();
        Adam { p, m: zero(), v: zero(), t: 0 }
    }

    fn step(&mut self, net: &mut Mlp, grads: &[Dense]) {
        self.t += 1;
        let AdamParams { learning_rate: lr, beta1: b1, beta2: b2, eps } = self.p;
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for ((l, g), (m, v)) in net.layers.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let upd = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut l.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(|p, &g, m, v| upd(p, g, m, v));
            ndarray::Zip::from(&mut l.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(|p, &g, m, v| upd(p, g, m, v));
        }
    }
}

/// Train on minibatches. Returns the model and the per-epoch mean minibatch loss.
///
/// The output bias starts at the target mean so early epochs fit shape, not offset.
pub fn fit_mlp(x: &Array2<f64>, y: &Array2<f64>, cfg: &MlpConfig) -> Result<(TrainedModel, Vec<f64>)> {
    check_pair(x, y)?;
    if cfg.batch_size == 0 || cfg.hidden.contains(&0) {
        return Err(Error::Config("batch size and hidden widths must be positive".into()));
    }
    let st = Standardizer::fit(x);
    let xs = st.transform(x)?;
    let mut widths = vec![x.ncols()];
    widths.extend(&cfg.hidden);
    widths.push(y.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Mlp::he_uniform(&widths, &mut rng);
    net.layers.last_mut().unwrap().b = y.mean_axis(Axis(0)).expect("non-empty");
    let mut adam = Adam::new(cfg.adam, &net);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let bx = xs.select(Axis(0), chunk);
            let by = y.select(Axis(0), chunk);
            let (loss, grads) = net.loss_and_grad(&bx, &by);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut net, &grads);
            sum += loss;
            batches += 1;
        }
        trace.push(sum / batches as f64);
    }
    let kind = ModelKind::Mlp {
        hidden: cfg.hidden.clone(),
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.adam.learning_rate,
        seed: cfg.seed,
        final_loss: trace.last().copied().unwrap_or(f64::NAN),
    };
    Ok((TrainedModel::new(kind, st, Net::Mlp(net)), trace))
}
