//! Multivariate Gaussians with isotropic, diagonal or dense covariance.

use crate::linalg::{symmetric_eigenvalues, Cholesky, Matrix};
use crate::scalar::{check_finite, ln_2pi, norm_sq};
use crate::{Error, Result, Scalar};

/// Dense covariances are refused above this dimension.
pub const MAX_DENSE_DIM: usize = 512;
/// Absolute tolerance on `|C_ij - C_ji|` for dense covariances.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance<T> {
    /// `σ² I`
    Isotropic(T),
    Diagonal(Vec<T>),
    Dense(Matrix<T>),
}

/// Representation granularity, coarsest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Representation {
    Isotropic,
    Diagonal,
    Dense,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Representation::Isotropic => "isotropic",
            Representation::Diagonal => "diagonal",
            Representation::Dense => "dense",
        })
    }
}

impl<T: Scalar> Covariance<T> {
    pub fn representation(&self) -> Representation {
        match self {
            Covariance::Isotropic(_) => Representation::Isotropic,
            Covariance::Diagonal(_) => Representation::Diagonal,
            Covariance::Dense(_) => Representation::Dense,
        }
    }

    /// Check positivity / positive-definiteness for dimension `d`. `which`
    /// names the input in error messages.
    pub fn validate(&self, d: usize, which: &'static str) -> Result<()> {
        let not_pd = |detail: String| Error::NotPositiveDefinite { which, detail };
        match self {
            Covariance::Isotropic(v) => {
                if !(*v > T::zero()) || !v.is_finite() {
                    return Err(not_pd(format!(
                        "isotropic variance {v} is not positive and finite"
                    )));
                }
            }
            Covariance::Diagonal(v) => {
                crate::error::check_dim(which, d, v.len())?;
                if let Some(i) = v.iter().position(|x| !(*x > T::zero()) || !x.is_finite()) {
                    return Err(not_pd(format!(
                        "diagonal entry {i} = {} is not positive and finite",
                        v[i]
                    )));
                }
            }
            Covariance::Dense(m) => {
                if d > MAX_DENSE_DIM {
                    return Err(Error::invalid(format!(
                        "{which}: dense covariance limited to d <= {MAX_DENSE_DIM}, got {d}"
                    )));
                }
                crate::error::check_dim(which, d, m.rows())?;
                crate::error::check_dim(which, d, m.cols())?;
                check_finite(which, m.as_slice())?;
                let asym = m.max_asymmetry();
                if asym > T::of(SYMMETRY_TOL) {
                    return Err(not_pd(format!(
                        "not symmetric (max |C_ij - C_ji| = {asym})"
                    )));
                }
                dense_cholesky(m, which)?;
            }
        }
        Ok(())
    }

    /// Same covariance in a representation at least as fine as `target`.
    pub fn promote(&self, target: Representation, d: usize) -> Self {
        if self.representation() >= target {
            return self.clone();
        }
        match (self, target) {
            (Covariance::Isotropic(v), Representation::Diagonal) => {
                Covariance::Diagonal(vec![*v; d])
            }
            (Covariance::Isotropic(v), Representation::Dense) => {
                Covariance::Dense(Matrix::from_diagonal(&vec![*v; d]))
            }
            (Covariance::Diagonal(v), Representation::Dense) => {
                Covariance::Dense(Matrix::from_diagonal(v))
            }
            _ => unreachable!("promotion only moves to finer representations"),
        }
    }

    pub fn to_dense(&self, d: usize) -> Matrix<T> {
        match self.promote(Representation::Dense, d) {
            Covariance::Dense(m) => m,
            _ => unreachable!(),
        }
    }

    /// `a * self + b * other` after promoting both to the finer representation.
    pub fn lin_comb(&self, a: T, other: &Self, b: T, d: usize) -> Self {
        let target = self.representation().max(other.representation());
        match (self.promote(target, d), other.promote(target, d)) {
            (Covariance::Isotropic(x), Covariance::Isotropic(y)) => {
                Covariance::Isotropic(a * x + b * y)
            }
            (Covariance::Diagonal(x), Covariance::Diagonal(y)) => {
                Covariance::Diagonal(x.iter().zip(&y).map(|(&u, &v)| a * u + b * v).collect())
            }
            (Covariance::Dense(x), Covariance::Dense(y)) => Covariance::Dense(x.lin_comb(a, &y, b)),
            _ => unreachable!(),
        }
    }

    /// Diagonal of the covariance as a vector of length `d`.
    pub fn diagonal(&self, d: usize) -> Vec<T> {
        match self {
            Covariance::Isotropic(v) => vec![*v; d],
            Covariance::Diagonal(v) => v.clone(),
            Covariance::Dense(m) => m.diagonal(),
        }
    }

    pub fn trace(&self, d: usize) -> T {
        match self {
            Covariance::Isotropic(v) => T::of_usize(d) * *v,
            Covariance::Diagonal(v) => v.iter().copied().sum(),
            Covariance::Dense(m) => m.trace(),
        }
    }
}

pub(crate) fn dense_cholesky<T: Scalar>(m: &Matrix<T>, which: &'static str) -> Result<Cholesky<T>> {
    Cholesky::factor(m).map_err(|fail| {
        let smallest = symmetric_eigenvalues(m)
            .first()
            .copied()
            .unwrap_or(T::zero());
        Error::NotPositiveDefinite {
            which,
            detail: format!(
                "Cholesky failed at pivot {} (residual {}); smallest eigenvalue estimate {}",
                fail.pivot, fail.residual, smallest
            ),
        }
    })
}

/// `N(mean, cov)`; always valid once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec<T> {
    mean: Vec<T>,
    cov: Covariance<T>,
}

impl<T: Scalar> GaussianSpec<T> {
    pub fn new(mean: Vec<T>, cov: Covariance<T>) -> Result<Self> {
        Self::new_named(mean, cov, "gaussian covariance")
    }

    pub(crate) fn new_named(mean: Vec<T>, cov: Covariance<T>, which: &'static str) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::invalid("gaussian dimension must be positive"));
        }
        check_finite("gaussian mean", &mean)?;
        cov.validate(mean.len(), which)?;
        Ok(Self { mean, cov })
    }

    /// `N(0, I)`
    pub fn standard(d: usize) -> Self {
        Self {
            mean: vec![T::zero(); d],
            cov: Covariance::Isotropic(T::one()),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Covariance<T> {
        &self.cov
    }

    pub fn representation(&self) -> Representation {
        self.cov.representation()
    }

    /// log N(x; mean, cov)
    pub fn log_density(&self, x: &[T]) -> Result<T> {
        let d = self.dim();
        crate::error::check_dim("gaussian log-density", d, x.len())?;
        let diff: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        let half = T::of(0.5);
        let dn = T::of_usize(d);
        let (quad, logdet) = match &self.cov {
            Covariance::Isotropic(v) => (norm_sq(&diff) / *v, dn * v.ln()),
            Covariance::Diagonal(v) => (
                diff.iter().zip(v).map(|(&e, &s)| e * e / s).sum(),
                v.iter().map(|s| s.ln()).sum(),
            ),
            Covariance::Dense(m) => {
                let ch = dense_cholesky(m, "gaussian covariance")?;
                (ch.quad_form(&diff), ch.log_det())
            }
        };
        Ok(-half * (dn * ln_2pi::<T>() + logdet + quad))
    }
}
