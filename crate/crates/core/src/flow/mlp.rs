//! Two-hidden-layer tanh network used as the coupling conditioner, with an
//! explicit backward pass.

use rand::Rng;

use super::tensor::Tensor;
use crate::rng::standard_normal;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
    pub w3: Tensor<T>,
    pub b3: Tensor<T>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct MlpCache<T> {
    input: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
}

fn gaussian_tensor<T: Scalar, R: Rng>(rng: &mut R, shape: &[usize], std: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| standard_normal::<T, _>(rng) * T::of(std))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches")
}

#[inline]
fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let n_in = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * n_in..(i + 1) * n_in];
        *o = b[i] + crate::scalar::dot(row, x);
    }
}

/// Accumulate `gw += g xᵀ`, `gb += g`, and `gx += Wᵀ g`.
#[inline]
fn affine_backward<T: Scalar>(
    w: &[T],
    x: &[T],
    g: &[T],
    gw: &mut [T],
    gb: &mut [T],
    gx: Option<&mut [T]>,
) {
    let n_in = x.len();
    for (i, &gi) in g.iter().enumerate() {
        gb[i] += gi;
        if gi == T::zero() {
            continue;
        }
        let grow = &mut gw[i * n_in..(i + 1) * n_in];
        for (gwij, &xj) in grow.iter_mut().zip(x) {
            *gwij += gi * xj;
        }
    }
    if let Some(gx) = gx {
        for (i, &gi) in g.iter().enumerate() {
            if gi == T::zero() {
                continue;
            }
            let row = &w[i * n_in..(i + 1) * n_in];
            for (gxj, &wij) in gx.iter_mut().zip(row) {
                *gxj += gi * wij;
            }
        }
    }
}

impl<T: Scalar> Mlp<T> {
    /// Hidden layers get scaled Gaussian weights; the output layer is drawn with
    /// standard deviation `out_std / sqrt(hidden)` (zero gives an all-zero output).
    pub fn new<R: Rng>(
        n_in: usize,
        hidden: usize,
        n_out: usize,
        out_std: f64,
        rng: &mut R,
    ) -> Self {
        let std1 = 1.0 / (n_in.max(1) as f64).sqrt();
        let std2 = 1.0 / (hidden as f64).sqrt();
        Self {
            w1: gaussian_tensor(rng, &[hidden, n_in], std1),
            b1: Tensor::zeros(&[hidden]),
            w2: gaussian_tensor(rng, &[hidden, hidden], std2),
            b2: Tensor::zeros(&[hidden]),
            w3: gaussian_tensor(rng, &[n_out, hidden], out_std * std2),
            b3: Tensor::zeros(&[n_out]),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.w3.shape()[0]
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_cached(x).0
    }

    pub(crate) fn forward_cached(&self, x: &[T]) -> (Vec<T>, MlpCache<T>) {
        let h = self.hidden();
        let mut h1 = vec![T::zero(); h];
        affine(self.w1.data(), self.b1.data(), x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut h2 = vec![T::zero(); h];
        affine(self.w2.data(), self.b2.data(), &h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = vec![T::zero(); self.n_out()];
        affine(self.w3.data(), self.b3.data(), &h2, &mut out);
        let cache = MlpCache {
            input: x.to_vec(),
            h1,
            h2,
        };
        (out, cache)
    }

    /// Backpropagate `g_out`. `grads` holds the six parameter gradients in field
    /// order; the input gradient is added into `g_in`.
    pub(crate) fn backward(
        &self,
        cache: &MlpCache<T>,
        g_out: &[T],
        grads: &mut [Vec<T>],
        g_in: &mut [T],
    ) {
        let h = self.hidden();
        let (g_w1b1, rest) = grads.split_at_mut(2);
        let (g_w2b2, g_w3b3) = rest.split_at_mut(2);

        let mut g_h2 = vec![T::zero(); h];
        {
            let (gw, gb) = g_w3b3.split_at_mut(1);
            affine_backward(
                self.w3.data(),
                &cache.h2,
                g_out,
                &mut gw[0],
                &mut gb[0],
                Some(&mut g_h2),
            );
        }
        for (g, &a) in g_h2.iter_mut().zip(&cache.h2) {
            *g *= T::one() - a * a;
        }
        let mut g_h1 = vec![T::zero(); h];
        {
            let (gw, gb) = g_w2b2.split_at_mut(1);
            affine_backward(
                self.w2.data(),
                &cache.h1,
                &g_h2,
                &mut gw[0],
                &mut gb[0],
                Some(&mut g_h1),
            );
        }
        for (g, &a) in g_h1.iter_mut().zip(&cache.h1) {
            *g *= T::one() - a * a;
        }
        let (gw, gb) = g_w1b1.split_at_mut(1);
        affine_backward(
            self.w1.data(),
            &cache.input,
            &g_h1,
            &mut gw[0],
            &mut gb[0],
            Some(g_in),
        );
    }

    pub fn tensors(&self) -> [&Tensor<T>; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }
}
