//! JSON posterior files. Floats are written in shortest round-trip decimal
//! form and parsed with correct rounding, so `f64` values survive exactly.
//!
//! ```json
//! {
//!   "format": "transflow-posterior",
//!   "version": 1,
//!   "d": 2,
//!   "mean": [0.5, 0.5],
//!   "covariance": { "kind": "isotropic", "variance": 0.5 },
//!   "provenance": { "role": "posterior", "lambda": 2.0, "m": 2, "lambda_over_m": 1.0 }
//! }
//! ```
//!
//! `covariance.kind` is one of `isotropic` (`variance`), `diagonal`
//! (`variances`) or `dense` (`rows`, row-major).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gaussian::{Covariance, GaussianSpec};
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

pub const POSTERIOR_FORMAT: &str = "transflow-posterior";
pub const POSTERIOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceRecord {
    Isotropic { variance: f64 },
    Diagonal { variances: Vec<f64> },
    Dense { rows: Vec<Vec<f64>> },
}

/// Where a distribution came from. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_over_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Provenance {
    pub fn conditioned(
        role: &str,
        lambda: f64,
        m: usize,
        checkpoint_sha256: Option<String>,
    ) -> Self {
        Self {
            role: Some(role.to_string()),
            lambda: Some(lambda),
            m: Some(m),
            lambda_over_m: Some(lambda / m as f64),
            checkpoint_sha256,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorRecord {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub mean: Vec<f64>,
    pub covariance: CovarianceRecord,
    #[serde(default)]
    pub provenance: Provenance,
}

impl PosteriorRecord {
    pub fn from_spec<T: Scalar>(g: &GaussianSpec<T>, provenance: Provenance) -> Self {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        let covariance = match g.cov() {
            Covariance::Isotropic(v) => CovarianceRecord::Isotropic {
                variance: v.to_f64_lossy(),
            },
            Covariance::Diagonal(v) => CovarianceRecord::Diagonal { variances: f(v) },
            Covariance::Dense(m) => CovarianceRecord::Dense {
                rows: (0..m.rows()).map(|i| f(m.row(i))).collect(),
            },
        };
        Self {
            format: POSTERIOR_FORMAT.to_string(),
            version: POSTERIOR_VERSION,
            d: g.dim(),
            mean: f(g.mean()),
            covariance,
            provenance,
        }
    }

    /// Rebuild and validate the distribution.
    pub fn to_spec<T: Scalar>(&self) -> Result<GaussianSpec<T>> {
        if self.format != POSTERIOR_FORMAT {
            return Err(Error::Unsupported(format!(
                "not a posterior file (format '{}')",
                self.format
            )));
        }
        if self.version != POSTERIOR_VERSION {
            return Err(Error::Unsupported(format!(
                "posterior version {}",
                self.version
            )));
        }
        crate::error::check_dim("posterior mean", self.d, self.mean.len())?;
        let c = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        let cov = match &self.covariance {
            CovarianceRecord::Isotropic { variance } => Covariance::Isotropic(T::of(*variance)),
            CovarianceRecord::Diagonal { variances } => Covariance::Diagonal(c(variances)),
            CovarianceRecord::Dense { rows } => {
                let rows: Vec<Vec<T>> = rows.iter().map(|r| c(r)).collect();
                Covariance::Dense(Matrix::from_rows(&rows)?)
            }
        };
        GaussianSpec::new(c(&self.mean), cov)
    }
}

pub fn to_json<T: Scalar>(g: &GaussianSpec<T>, provenance: Provenance) -> String {
    serde_json::to_string_pretty(&PosteriorRecord::from_spec(g, provenance))
        .expect("record serializes")
}

pub fn from_json<T: Scalar>(text: &str) -> Result<(GaussianSpec<T>, Provenance)> {
    let rec: PosteriorRecord = serde_json::from_str(text)?;
    Ok((rec.to_spec()?, rec.provenance))
}

pub fn save_posterior<T: Scalar>(
    g: &GaussianSpec<T>,
    provenance: Provenance,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(g, provenance)).map_err(|e| Error::io(path, e))
}

pub fn load_posterior<T: Scalar>(path: impl AsRef<Path>) -> Result<(GaussianSpec<T>, Provenance)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
