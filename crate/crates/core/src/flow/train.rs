//! Maximum-likelihood training loop.

use rand::Rng;

use super::model::FlowModel;
use crate::data::Dataset;
use crate::rng::{derive_seed, permutation, seeded};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm clipping threshold (`f64::INFINITY` disables).
    pub grad_clip: f64,
    /// Uniform dequantization noise amplitude added to each coordinate.
    pub dequant_noise: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 100,
            optimizer: OptimizerKind::adam(),
            grad_clip: 10.0,
            dequant_noise: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(
                "learning rate must be finite and non-negative",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::invalid(
                "gradient clipping threshold must be positive",
            ));
        }
        if !(self.dequant_noise >= 0.0) || !self.dequant_noise.is_finite() {
            return Err(Error::invalid(
                "dequantization noise must be finite and non-negative",
            ));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            let ok = (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0;
            if !ok {
                return Err(Error::invalid("adam needs 0 <= beta < 1 and eps > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-point NLL over the epoch's batches, before each batch's update.
    pub mean_nll: f64,
    pub mean_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: FlowModel<T>,
    pub history: Vec<EpochStats>,
}

struct Optimizer<T> {
    kind: OptimizerKind,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Optimizer<T> {
    fn new(kind: OptimizerKind, model: &FlowModel<T>) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (model.zero_gradients(), model.zero_gradients()),
        };
        Self {
            kind,
            step: 0,
            m,
            v,
        }
    }

    fn apply(&mut self, model: &mut FlowModel<T>, grads: &[Vec<T>], lr: f64) {
        self.step += 1;
        let lr = T::of(lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in model.parameters_mut().into_iter().zip(grads) {
                    for (w, &gw) in p.data_mut().iter_mut().zip(g) {
                        *w -= lr * gw;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
                let c1 = T::one() - b1.powi(self.step);
                let c2 = T::one() - b2.powi(self.step);
                for (k, p) in model.parameters_mut().into_iter().enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for (i, w) in p.data_mut().iter_mut().enumerate() {
                        let g = grads[k][i];
                        m[i] = b1 * m[i] + (T::one() - b1) * g;
                        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                        let mhat = m[i] / c1;
                        let vhat = v[i] / c2;
                        *w -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

fn clip_global_norm<T: Scalar>(grads: &mut [Vec<T>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flatten()
        .map(|g| g.to_f64_lossy().powi(2))
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = T::of(max_norm / norm);
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}

pub fn train<T: Scalar>(
    model: &FlowModel<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_with(model, data, cfg, |_| {})
}

/// Train by minibatch gradient descent on the mean NLL. `on_epoch` sees each
/// epoch's statistics as they complete. Deterministic for a fixed seed.
pub fn train_with<T: Scalar>(
    model: &FlowModel<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    crate::error::check_dim("training dataset", model.dim(), data.dim())?;

    let mut model = model.clone();
    let mut opt = Optimizer::new(cfg.optimizer, &model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let noise = T::of(cfg.dequant_noise);

    for epoch in 0..cfg.epochs {
        let mut rng = seeded(derive_seed(cfg.seed, epoch as u64));
        let order = permutation(&mut rng, data.len());
        let mut nll_sum = 0.0;
        let mut norm_sum = 0.0;
        let mut n_batches = 0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Vec<T>> = chunk
                .iter()
                .map(|&i| {
                    let x = data.point(i);
                    if cfg.dequant_noise > 0.0 {
                        x.iter()
                            .map(|&v| v + noise * T::of(rng.random::<f64>()))
                            .collect()
                    } else {
                        x.to_vec()
                    }
                })
                .collect();
            let (loss, mut grads) = model.nll_gradient(&batch)?;
            let loss = loss.to_f64_lossy();
            let grads_finite = grads.iter().flatten().all(|g| g.is_finite());
            if !loss.is_finite() || !grads_finite {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    loss,
                });
            }
            norm_sum += clip_global_norm(&mut grads, cfg.grad_clip);
            opt.apply(&mut model, &grads, cfg.learning_rate);
            nll_sum += loss * chunk.len() as f64;
            n_batches += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_nll: nll_sum / data.len() as f64,
            mean_grad_norm: norm_sum / n_batches as f64,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { model, history })
}
