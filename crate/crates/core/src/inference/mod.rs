//! Bayesian inference in a flow's latent space.

pub mod file;
pub mod gaussian;
pub mod posterior;

pub use gaussian::{Covariance, GaussianSpec, Representation, MAX_DENSE_DIM};
pub use posterior::{
    conditioned_sample, dense_covariance, encode_evidence, interpolate, kl_to_prior,
    posterior_general, posterior_isotropic, posterior_predictive, prior_logprob, sample_latent,
    Evidence, LambdaPolicy, LikelihoodConfig,
};
