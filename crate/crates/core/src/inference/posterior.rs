//! Conjugate Gaussian inference over flow latents.
//!
//! With prior `N(μ₀, Σ₀)` and `m` latents observed under a Gaussian likelihood
//! of known covariance `Σ`, the posterior over the latent mean is
//!
//! ```text
//! Σ_p = (Σ₀⁻¹ + m Σ⁻¹)⁻¹
//! μ_p = Σ_p (Σ₀⁻¹ μ₀ + m Σ⁻¹ ζ̄)
//! ```
//!
//! and the posterior predictive for a new latent is `N(μ_p, Σ_p + Σ)`.
//! With `μ₀ = 0`, `Σ₀ = I` and `Σ = λI` this reduces to
//! `μ_p = (m/λ) ζ̄ / (m/λ + 1)` and `Σ_p = I / (m/λ + 1)`.

use super::gaussian::{dense_cholesky, Covariance, GaussianSpec, Representation};
use crate::flow::FlowModel;
use crate::linalg::Matrix;
use crate::rng::standard_normal_rows;
use crate::scalar::{check_finite, std_normal_log_density};
use crate::{Error, Result, Scalar};

/// Latents `ζ_1..ζ_m` of the evidence with their cached mean `ζ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence<T> {
    latents: Vec<Vec<T>>,
    mean: Vec<T>,
}

impl<T: Scalar> Evidence<T> {
    pub fn new(latents: Vec<Vec<T>>) -> Result<Self> {
        let first = latents.first().ok_or(Error::Empty("evidence"))?;
        let d = first.len();
        if d == 0 {
            return Err(Error::invalid(
                "evidence latents must have positive dimension",
            ));
        }
        let mut mean = vec![T::zero(); d];
        for z in &latents {
            crate::error::check_dim("evidence latent", d, z.len())?;
            check_finite("evidence latent", z)?;
            for (m, &v) in mean.iter_mut().zip(z) {
                *m += v;
            }
        }
        let n = T::of_usize(latents.len());
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(Self { latents, mean })
    }

    pub fn latents(&self) -> &[Vec<T>] {
        &self.latents
    }

    /// ζ̄
    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn m(&self) -> usize {
        self.latents.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Map evidence points to latents `ζ_i = f⁻¹(x_i)`.
pub fn encode_evidence<T: Scalar>(model: &FlowModel<T>, xs: &[Vec<T>]) -> Result<Evidence<T>> {
    if xs.is_empty() {
        return Err(Error::Empty("evidence"));
    }
    let latents = xs
        .iter()
        .map(|x| model.inverse(x))
        .collect::<Result<Vec<_>>>()?;
    Evidence::new(latents)
}

/// Known covariance `Σ` of the Gaussian likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodConfig<T> {
    cov: Covariance<T>,
}

impl<T: Scalar> LikelihoodConfig<T> {
    /// `Σ = λ I`
    pub fn isotropic(lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self {
            cov: Covariance::Isotropic(lambda),
        })
    }

    pub fn from_covariance(cov: Covariance<T>, d: usize) -> Result<Self> {
        cov.validate(d, "likelihood covariance")?;
        Ok(Self { cov })
    }

    pub fn cov(&self) -> &Covariance<T> {
        &self.cov
    }

    /// The scalar λ when the likelihood is isotropic.
    pub fn lambda(&self) -> Option<T> {
        match self.cov {
            Covariance::Isotropic(l) => Some(l),
            _ => None,
        }
    }
}

/// How λ is chosen for a set of `m` observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Absolute(f64),
    FractionOfM(f64),
}

impl Default for LambdaPolicy {
    /// `λ = 0.5 m`, the middle of the `[0.3m, 0.7m]` band that works well.
    fn default() -> Self {
        LambdaPolicy::FractionOfM(0.5)
    }
}

impl LambdaPolicy {
    pub fn resolve(&self, m: usize) -> Result<f64> {
        let lambda = match *self {
            LambdaPolicy::Absolute(l) => l,
            LambdaPolicy::FractionOfM(f) => f * m as f64,
        };
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda policy {self:?} gives non-positive lambda {lambda} for m = {m}"
            )));
        }
        Ok(lambda)
    }
}

/// Exact conjugate posterior for an arbitrary Gaussian prior and likelihood
/// covariance. The result uses the coarsest representation that holds both
/// inputs. Dense cases solve with the Cholesky factor of `Σ₀ + Σ/m`.
pub fn posterior_general<T: Scalar>(
    ev: &Evidence<T>,
    prior: &GaussianSpec<T>,
    lik: &LikelihoodConfig<T>,
) -> Result<GaussianSpec<T>> {
    let d = prior.dim();
    crate::error::check_dim("posterior evidence", d, ev.dim())?;
    lik.cov().validate(d, "likelihood covariance")?;
    prior.cov().validate(d, "prior covariance")?;
    let m = T::of_usize(ev.m());
    let target = prior.representation().max(lik.cov().representation());
    let mu0 = prior.mean();
    let zbar = ev.mean();

    match target {
        Representation::Isotropic | Representation::Diagonal => {
            let v0 = prior.cov().diagonal(d);
            let vl = lik.cov().diagonal(d);
            let mut mean = Vec::with_capacity(d);
            let mut var = Vec::with_capacity(d);
            for i in 0..d {
                let p0 = T::one() / v0[i];
                let pl = m / vl[i];
                let v = T::one() / (p0 + pl);
                mean.push(v * (p0 * mu0[i] + pl * zbar[i]));
                var.push(v);
            }
            let cov = if target == Representation::Isotropic {
                Covariance::Isotropic(var[0])
            } else {
                Covariance::Diagonal(var)
            };
            GaussianSpec::new_named(mean, cov, "posterior covariance")
        }
        Representation::Dense => {
            let s0 = prior.cov().to_dense(d);
            let sl_over_m = lik.cov().to_dense(d).map(|v| v / m);
            let s = s0.lin_comb(T::one(), &sl_over_m, T::one()).symmetrized();
            let ch = dense_cholesky(&s, "prior covariance + likelihood covariance / m")?;
            let resid: Vec<T> = zbar.iter().zip(mu0).map(|(&z, &u)| z - u).collect();
            let gain_resid = s0.matvec(&ch.solve(&resid));
            let mean = mu0.iter().zip(&gain_resid).map(|(&u, &g)| u + g).collect();
            // Σ_p = Σ₀ S⁻¹ (Σ/m) = (S⁻¹ Σ₀)ᵀ (Σ/m)
            let x = ch.solve_matrix(&s0);
            let cov = x.transpose().matmul(&sl_over_m).symmetrized();
            GaussianSpec::new_named(mean, Covariance::Dense(cov), "posterior covariance")
        }
    }
}

/// Closed-form posterior under prior `N(0, I)` and likelihood `Σ = λI`.
pub fn posterior_isotropic<T: Scalar>(ev: &Evidence<T>, lambda: T) -> Result<GaussianSpec<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let r = T::of_usize(ev.m()) / lambda;
    let denom = r + T::one();
    let mean = ev.mean().iter().map(|&z| r * z / denom).collect();
    GaussianSpec::new_named(
        mean,
        Covariance::Isotropic(T::one() / denom),
        "posterior covariance",
    )
}

/// Posterior predictive `N(μ_p, Σ_p + Σ)`.
pub fn posterior_predictive<T: Scalar>(
    post: &GaussianSpec<T>,
    lik: &LikelihoodConfig<T>,
) -> Result<GaussianSpec<T>> {
    let d = post.dim();
    lik.cov().validate(d, "likelihood covariance")?;
    let cov = post.cov().lin_comb(T::one(), lik.cov(), T::one(), d);
    GaussianSpec::new_named(post.mean().to_vec(), cov, "posterior predictive covariance")
}

/// `n` draws from `g`, using the same standard-normal stream as
/// [`FlowModel::sample`] for a given seed.
pub fn sample_latent<T: Scalar>(g: &GaussianSpec<T>, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let d = g.dim();
    let eps = standard_normal_rows::<T>(seed, n, d);
    let mu = g.mean();
    let out = match g.cov() {
        Covariance::Isotropic(v) => {
            let s = v.sqrt();
            eps.into_iter()
                .map(|e| e.iter().zip(mu).map(|(&x, &m)| m + s * x).collect())
                .collect()
        }
        Covariance::Diagonal(v) => {
            let s: Vec<T> = v.iter().map(|x| x.sqrt()).collect();
            eps.into_iter()
                .map(|e| (0..d).map(|i| mu[i] + s[i] * e[i]).collect())
                .collect()
        }
        Covariance::Dense(c) => {
            let ch = dense_cholesky(c, "sampling covariance")?;
            let l = ch.lower();
            eps.into_iter()
                .map(|e| l.matvec(&e).iter().zip(mu).map(|(&x, &m)| m + x).collect())
                .collect()
        }
    };
    Ok(out)
}

/// Draws `f(z)` with `z ~ g`.
pub fn conditioned_sample<T: Scalar>(
    model: &FlowModel<T>,
    g: &GaussianSpec<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    crate::error::check_dim("conditioned sample", model.dim(), g.dim())?;
    sample_latent(g, n, seed)?
        .iter()
        .map(|z| model.forward(z))
        .collect()
}

/// Linear interpolation of mean and covariance, `(1 - t) a + t b`.
pub fn interpolate<T: Scalar>(
    a: &GaussianSpec<T>,
    b: &GaussianSpec<T>,
    t: T,
) -> Result<GaussianSpec<T>> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::invalid(format!(
            "interpolation weight t = {t} outside [0, 1]"
        )));
    }
    let d = a.dim();
    crate::error::check_dim("interpolation", d, b.dim())?;
    let s = T::one() - t;
    let mean = a
        .mean()
        .iter()
        .zip(b.mean())
        .map(|(&x, &y)| s * x + t * y)
        .collect();
    let cov = a.cov().lin_comb(s, b.cov(), t, d);
    GaussianSpec::new_named(mean, cov, "interpolated covariance")
}

/// log N(ζ; 0, I)
pub fn prior_logprob<T: Scalar>(z: &[T]) -> T {
    std_normal_log_density(z)
}

/// Closed-form KL(g ‖ N(0, I)) = ½(tr Σ + ‖μ‖² − d − log det Σ).
pub fn kl_to_prior<T: Scalar>(g: &GaussianSpec<T>) -> T {
    let d = g.dim();
    // v - 1 - ln v, evaluated without cancellation near v = 1
    let excess = |v: T| {
        let e = v - T::one();
        e - e.ln_1p()
    };
    let spread = match g.cov() {
        Covariance::Isotropic(v) => T::of_usize(d) * excess(*v),
        Covariance::Diagonal(v) => v.iter().map(|&x| excess(x)).sum(),
        Covariance::Dense(c) => {
            let ch = dense_cholesky(c, "gaussian covariance").expect("validated at construction");
            c.trace() - T::of_usize(d) - ch.log_det()
        }
    };
    T::of(0.5) * (spread + crate::scalar::norm_sq(g.mean()))
}

/// Covariance as a dense matrix (for reporting and tests).
pub fn dense_covariance<T: Scalar>(g: &GaussianSpec<T>) -> Matrix<T> {
    g.cov().to_dense(g.dim())
}
