//! Normalizing flows repurposed without retraining.
//!
//! A trained affine-coupling flow `x = f(z)` with prior `z ~ N(0, I)` is kept
//! fixed. Evidence points are mapped to latents with `f⁻¹`, the prior is
//! updated to a closed-form Gaussian posterior, and that posterior is used to
//! sample new data resembling the evidence, to interpolate between evidence
//! sets, or (through the posterior predictive) to classify.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which the file formats store.

pub mod classifier;
pub mod data;
pub mod error;
pub mod flow;
pub mod inference;
pub mod linalg;
pub mod rng;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type FlowModel = flow::FlowModel<f64>;
pub type FlowModelF32 = flow::FlowModel<f32>;
pub type Dataset = data::Dataset<f64>;
pub type DatasetF32 = data::Dataset<f32>;
pub type GaussianSpec = inference::GaussianSpec<f64>;
pub type GaussianSpecF32 = inference::GaussianSpec<f32>;
pub type Covariance = inference::Covariance<f64>;
pub type Evidence = inference::Evidence<f64>;
pub type LikelihoodConfig = inference::LikelihoodConfig<f64>;
pub type ClassifierBank = classifier::ClassifierBank<f64>;
pub type Matrix = linalg::Matrix<f64>;
