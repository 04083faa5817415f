use super::block::{parity_mask, CouplingBlock};
use super::tensor::Tensor;
use super::transform::DataTransform;
use crate::rng::{seeded, standard_normal_rows};
use crate::scalar::{check_finite, std_normal_log_density};
use crate::{Error, Result, Scalar};

/// Invertible map `x = f(z)` from the latent space (prior `N(0, I)`) to data
/// space, built from a fixed preprocessing transform and a stack of coupling
/// blocks. Block 0 sits next to the data; `f⁻¹` runs the blocks in order and `f`
/// in reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel<T> {
    d: usize,
    transform: DataTransform<T>,
    blocks: Vec<CouplingBlock<T>>,
}

/// Conditioner width used when none is given: `max(64, 4d)`.
pub fn default_hidden_width(d: usize) -> usize {
    64.max(4 * d)
}

impl<T: Scalar> FlowModel<T> {
    /// Identity-initialized model: zero conditioner outputs and identity
    /// normalization, so only `transform` acts until training.
    pub fn new(d: usize, n_blocks: usize, transform: DataTransform<T>, seed: u64) -> Result<Self> {
        Self::build(
            d,
            n_blocks,
            default_hidden_width(d),
            transform,
            seed,
            0.0,
            0.0,
        )
    }

    pub fn with_hidden(
        d: usize,
        n_blocks: usize,
        hidden: usize,
        transform: DataTransform<T>,
        seed: u64,
    ) -> Result<Self> {
        Self::build(d, n_blocks, hidden, transform, seed, 0.0, 0.0)
    }

    /// Every parameter drawn at random (non-identity); `scale` sets the
    /// spread of the conditioner outputs and normalization parameters.
    pub fn random(
        d: usize,
        n_blocks: usize,
        hidden: usize,
        transform: DataTransform<T>,
        seed: u64,
        scale: f64,
    ) -> Result<Self> {
        let mut m = Self::build(d, n_blocks, hidden, transform, seed, scale, scale)?;
        let mut rng = seeded(crate::rng::derive_seed(seed, 1));
        for blk in &mut m.blocks {
            for t in blk.net.tensors_mut() {
                if t.shape().len() == 1 {
                    for v in t.data_mut() {
                        *v = crate::rng::standard_normal::<T, _>(&mut rng) * T::of(0.3 * scale);
                    }
                }
            }
        }
        Ok(m)
    }

    fn build(
        d: usize,
        n_blocks: usize,
        hidden: usize,
        transform: DataTransform<T>,
        seed: u64,
        out_std: f64,
        norm_std: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        transform.validate(d)?;
        let mut rng = seeded(seed);
        let blocks = (0..n_blocks)
            .map(|k| {
                let mut b = CouplingBlock::new(parity_mask(d, k), hidden, out_std, &mut rng);
                if norm_std > 0.0 {
                    b.perturb_norm(&mut rng, norm_std);
                }
                b
            })
            .collect();
        Ok(Self {
            d,
            transform,
            blocks,
        })
    }

    pub fn from_parts(
        d: usize,
        transform: DataTransform<T>,
        blocks: Vec<CouplingBlock<T>>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        transform.validate(d)?;
        for b in &blocks {
            crate::error::check_dim("coupling block", d, b.dim())?;
        }
        Ok(Self {
            d,
            transform,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn transform(&self) -> &DataTransform<T> {
        &self.transform
    }

    pub fn blocks(&self) -> &[CouplingBlock<T>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [CouplingBlock<T>] {
        &mut self.blocks
    }

    fn check_input(&self, context: &'static str, v: &[T]) -> Result<()> {
        crate::error::check_dim(context, self.d, v.len())?;
        check_finite(context, v)
    }

    /// `x = f(z)`.
    pub fn forward(&self, z: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_with_logdet(z)?.0)
    }

    /// `x = f(z)` together with `log|det ∂f/∂z|`.
    pub fn forward_with_logdet(&self, z: &[T]) -> Result<(Vec<T>, T)> {
        self.check_input("latent vector", z)?;
        let mut h = z.to_vec();
        let mut ld = T::zero();
        for blk in self.blocks.iter().rev() {
            let (prev, l) = blk.generate(&h);
            h = prev;
            ld += l;
        }
        let (x, l) = self.transform.invert(&h);
        Ok((x, ld + l))
    }

    /// `z = f⁻¹(x)`.
    pub fn inverse(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.inverse_with_logdet(x)?.0)
    }

    /// `z = f⁻¹(x)` together with `log|det ∂f⁻¹/∂x|`.
    pub fn inverse_with_logdet(&self, x: &[T]) -> Result<(Vec<T>, T)> {
        self.check_input("data point", x)?;
        let (mut h, mut ld) = self.transform.apply(x);
        for blk in &self.blocks {
            let (next, l) = blk.normalize(&h);
            h = next;
            ld += l;
        }
        Ok((h, ld))
    }

    /// Exact log-density of `x` under the model.
    pub fn log_prob(&self, x: &[T]) -> Result<T> {
        let (z, ld) = self.inverse_with_logdet(x)?;
        Ok(std_normal_log_density(&z) + ld)
    }

    /// `n` draws `f(z_i)` with `z_i ~ N(0, I)` from the seeded stream.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        standard_normal_rows(seed, n, self.d)
            .iter()
            .map(|z| self.forward(z))
            .collect()
    }

    /// Data-dependent initialization: each block's normalization is set so its
    /// input batch leaves with zero mean and unit variance per dimension.
    pub fn initialize_from_data(&mut self, xs: &[Vec<T>]) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::Empty("initialization data"));
        }
        let mut hs = Vec::with_capacity(xs.len());
        for x in xs {
            self.check_input("initialization data", x)?;
            hs.push(self.transform.apply(x).0);
        }
        let n = T::of_usize(hs.len());
        let floor = T::of(1e-3);
        for blk in &mut self.blocks {
            let d = self.d;
            let mut mean = vec![T::zero(); d];
            for h in &hs {
                for (m, &v) in mean.iter_mut().zip(h) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![T::zero(); d];
            for h in &hs {
                for ((s, &v), &m) in var.iter_mut().zip(h).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            blk.norm.loc.data_mut().copy_from_slice(&mean);
            for (ls, s) in blk.norm.log_scale.data_mut().iter_mut().zip(&var) {
                *ls = -((*s / n).sqrt().max(floor)).ln();
            }
            for h in &mut hs {
                *h = blk.normalize(h).0;
            }
        }
        Ok(())
    }

    /// Trainable tensors, block by block.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        self.blocks.iter().flat_map(|b| b.tensors()).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.blocks
            .iter_mut()
            .flat_map(|b| b.tensors_mut())
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    pub fn zero_gradients(&self) -> Vec<Vec<T>> {
        self.parameters()
            .iter()
            .map(|t| vec![T::zero(); t.len()])
            .collect()
    }

    /// Negative log-likelihood of one point, accumulating its gradient into
    /// `grads` (laid out as [`parameters`](Self::parameters)).
    pub fn accumulate_nll_gradient(&self, x: &[T], grads: &mut [Vec<T>]) -> Result<T> {
        self.check_input("training point", x)?;
        let per_block = 8;
        let (mut h, mut ld) = self.transform.apply(x);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let (next, l, cache) = blk.normalize_cached(&h);
            h = next;
            ld += l;
            caches.push(cache);
        }
        let nll = -(std_normal_log_density(&h) + ld);
        let mut g = h;
        for (k, blk) in self.blocks.iter().enumerate().rev() {
            let slot = &mut grads[k * per_block..(k + 1) * per_block];
            g = blk.backward(&caches[k], &g, slot);
        }
        Ok(nll)
    }

    /// Mean negative log-likelihood over `batch` and its gradient.
    pub fn nll_gradient(&self, batch: &[Vec<T>]) -> Result<(T, Vec<Vec<T>>)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut grads = self.zero_gradients();
        let mut total = T::zero();
        for x in batch {
            total += self.accumulate_nll_gradient(x, &mut grads)?;
        }
        let n = T::of_usize(batch.len());
        for g in grads.iter_mut().flatten() {
            *g /= n;
        }
        Ok((total / n, grads))
    }

    pub fn mean_nll(&self, xs: &[Vec<T>]) -> Result<T> {
        if xs.is_empty() {
            return Err(Error::Empty("evaluation data"));
        }
        let mut total = T::zero();
        for x in xs {
            total -= self.log_prob(x)?;
        }
        Ok(total / T::of_usize(xs.len()))
    }
}
