//! One flow step: per-dimension affine normalization followed by an affine
//! coupling transform.
//!
//! Written in the normalizing direction (data side to latent side):
//!
//! ```text
//! a     = (h - loc) * exp(log_scale)
//! out_A = a_A
//! out_B = a_B * exp(s(a_A)) + t(a_A),   s = s_max * tanh(raw / s_max)
//! ```
//!
//! `A` is the pass-through half of the mask and `B` the transformed half.

use rand::Rng;

use super::mlp::{Mlp, MlpCache};
use super::tensor::Tensor;
use crate::rng::standard_normal;
use crate::{Error, Result, Scalar};

/// Log-scales from the conditioner are squashed into `[-S_MAX, S_MAX]`.
pub const S_MAX: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ActNorm<T> {
    pub loc: Tensor<T>,
    pub log_scale: Tensor<T>,
}

impl<T: Scalar> ActNorm<T> {
    pub fn identity(d: usize) -> Self {
        Self {
            loc: Tensor::zeros(&[d]),
            log_scale: Tensor::zeros(&[d]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock<T> {
    /// `true` marks a pass-through (conditioning) dimension.
    mask: Vec<bool>,
    cond_idx: Vec<usize>,
    trans_idx: Vec<usize>,
    pub norm: ActNorm<T>,
    pub net: Mlp<T>,
}

pub(crate) struct BlockCache<T> {
    a: Vec<T>,
    s: Vec<T>,
    mlp: MlpCache<T>,
}

/// Alternating parity mask: block `k` transforms dimensions with `(i + k)` even.
pub fn parity_mask(d: usize, k: usize) -> Vec<bool> {
    (0..d).map(|i| (i + k) % 2 == 1).collect()
}

impl<T: Scalar> CouplingBlock<T> {
    pub fn new<R: Rng>(mask: Vec<bool>, hidden: usize, out_std: f64, rng: &mut R) -> Self {
        let d = mask.len();
        let n_cond = mask.iter().filter(|&&m| m).count();
        let net = Mlp::new(n_cond, hidden, 2 * (d - n_cond), out_std, rng);
        Self::from_parts(mask, ActNorm::identity(d), net).expect("consistent shapes")
    }

    pub fn from_parts(mask: Vec<bool>, norm: ActNorm<T>, net: Mlp<T>) -> Result<Self> {
        let d = mask.len();
        let cond_idx: Vec<usize> = (0..d).filter(|&i| mask[i]).collect();
        let trans_idx: Vec<usize> = (0..d).filter(|&i| !mask[i]).collect();
        crate::error::check_dim("actnorm loc", d, norm.loc.len())?;
        crate::error::check_dim("actnorm log-scale", d, norm.log_scale.len())?;
        crate::error::check_dim("conditioner input", cond_idx.len(), net.n_in())?;
        crate::error::check_dim("conditioner output", 2 * trans_idx.len(), net.n_out())?;
        if net.w2.shape() != [net.hidden(), net.hidden()] || net.w3.shape()[1] != net.hidden() {
            return Err(Error::invalid("conditioner hidden layer shapes disagree"));
        }
        Ok(Self {
            mask,
            cond_idx,
            trans_idx,
            norm,
            net,
        })
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Randomize the normalization parameters (for tests and random models).
    pub fn perturb_norm<R: Rng>(&mut self, rng: &mut R, std: f64) {
        for v in self.norm.loc.data_mut() {
            *v = standard_normal::<T, _>(rng) * T::of(std);
        }
        for v in self.norm.log_scale.data_mut() {
            *v = standard_normal::<T, _>(rng) * T::of(std);
        }
    }

    fn conditioner(&self, a: &[T]) -> (Vec<T>, Vec<T>, MlpCache<T>) {
        let u: Vec<T> = self.cond_idx.iter().map(|&i| a[i]).collect();
        let (out, cache) = self.net.forward_cached(&u);
        let nb = self.trans_idx.len();
        let smax = T::of(S_MAX);
        let s = out[..nb]
            .iter()
            .map(|&r| smax * (r / smax).tanh())
            .collect();
        let t = out[nb..].to_vec();
        (s, t, cache)
    }

    /// Normalizing direction; returns output and log|det| of this step.
    pub fn normalize(&self, h: &[T]) -> (Vec<T>, T) {
        let (out, ld, _) = self.normalize_cached(h);
        (out, ld)
    }

    pub(crate) fn normalize_cached(&self, h: &[T]) -> (Vec<T>, T, BlockCache<T>) {
        let loc = self.norm.loc.data();
        let ls = self.norm.log_scale.data();
        let a: Vec<T> = (0..h.len())
            .map(|i| (h[i] - loc[i]) * ls[i].exp())
            .collect();
        let (s, t, mlp) = self.conditioner(&a);
        let mut out = a.clone();
        for (j, &b) in self.trans_idx.iter().enumerate() {
            out[b] = a[b] * s[j].exp() + t[j];
        }
        let ld = ls.iter().copied().sum::<T>() + s.iter().copied().sum::<T>();
        (out, ld, BlockCache { a, s, mlp })
    }

    /// Generative direction (inverse of [`normalize`](Self::normalize)); returns
    /// input and log|det| of this inverse step.
    pub fn generate(&self, out: &[T]) -> (Vec<T>, T) {
        let mut a = out.to_vec();
        let (s, t, _) = self.conditioner(&a);
        for (j, &b) in self.trans_idx.iter().enumerate() {
            a[b] = (out[b] - t[j]) * (-s[j]).exp();
        }
        let loc = self.norm.loc.data();
        let ls = self.norm.log_scale.data();
        let h = (0..a.len())
            .map(|i| a[i] * (-ls[i]).exp() + loc[i])
            .collect();
        let ld = ls.iter().copied().sum::<T>() + s.iter().copied().sum::<T>();
        (h, -ld)
    }

    /// Backward pass of `loss(out) - logdet` where `g_out = d loss / d out`.
    /// Writes parameter gradients into `grads` (loc, log_scale, six net
    /// tensors) and returns the gradient with respect to the block input.
    pub(crate) fn backward(
        &self,
        cache: &BlockCache<T>,
        g_out: &[T],
        grads: &mut [Vec<T>],
    ) -> Vec<T> {
        let d = self.dim();
        let smax = T::of(S_MAX);
        let nb = self.trans_idx.len();
        let mut g_a = g_out.to_vec();
        let mut g_net = vec![T::zero(); 2 * nb];
        for (j, &b) in self.trans_idx.iter().enumerate() {
            let es = cache.s[j].exp();
            g_a[b] = g_out[b] * es;
            let g_s = g_out[b] * cache.a[b] * es - T::one();
            let r = cache.s[j] / smax;
            g_net[j] = g_s * (T::one() - r * r);
            g_net[nb + j] = g_out[b];
        }
        let (g_norm, g_mlp) = grads.split_at_mut(2);
        let mut g_u = vec![T::zero(); self.cond_idx.len()];
        self.net.backward(&cache.mlp, &g_net, g_mlp, &mut g_u);
        for (k, &i) in self.cond_idx.iter().enumerate() {
            g_a[i] += g_u[k];
        }

        let ls = self.norm.log_scale.data();
        let mut g_h = vec![T::zero(); d];
        for i in 0..d {
            let e = ls[i].exp();
            g_h[i] = g_a[i] * e;
            g_norm[0][i] -= g_a[i] * e;
            g_norm[1][i] += g_a[i] * cache.a[i] - T::one();
        }
        g_h
    }

    /// Trainable tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![&self.norm.loc, &self.norm.log_scale];
        v.extend(self.net.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = vec![&mut self.norm.loc, &mut self.norm.log_scale];
        v.extend(self.net.tensors_mut());
        v
    }
}
