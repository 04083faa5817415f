//! Fixed (non-trainable) data-space preprocessing applied before the coupling
//! stack, with its exact log-determinant.

use crate::{Error, Result, Scalar};

/// Default boundary margin for the logit transform.
pub const LOGIT_ALPHA: f64 = 0.05;
/// Pixel range: dequantized pixels `x + U[0, 1)` lie in `[0, 256)`.
pub const PIXEL_RANGE: f64 = 256.0;

#[derive(Debug, Clone, PartialEq)]
pub enum DataTransform<T> {
    Identity,
    /// `y = (x - shift) / scale` per dimension.
    Standardize {
        shift: Vec<T>,
        scale: Vec<T>,
    },
    /// `u = x / range`, `p = alpha + (1 - 2 alpha) u`, `y = logit(p)`.
    /// `p` is clamped into the open unit interval before the logit.
    Logit {
        alpha: T,
        range: T,
    },
}

impl<T: Scalar> DataTransform<T> {
    pub fn logit_pixels() -> Self {
        DataTransform::Logit {
            alpha: T::of(LOGIT_ALPHA),
            range: T::of(PIXEL_RANGE),
        }
    }

    /// Per-dimension mean / standard deviation of `points`.
    pub fn standardize_from(points: &[Vec<T>]) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("standardization data"))?;
        let d = first.len();
        let n = T::of_usize(points.len());
        let mut shift = vec![T::zero(); d];
        for p in points {
            crate::error::check_dim("standardization data", d, p.len())?;
            for (s, &v) in shift.iter_mut().zip(p) {
                *s += v;
            }
        }
        shift.iter_mut().for_each(|s| *s /= n);
        let mut scale = vec![T::zero(); d];
        for p in points {
            for ((s, &v), &m) in scale.iter_mut().zip(p).zip(&shift) {
                *s += (v - m) * (v - m);
            }
        }
        let floor = T::of(1e-8);
        scale
            .iter_mut()
            .for_each(|s| *s = (*s / n).sqrt().max(floor));
        Ok(DataTransform::Standardize { shift, scale })
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            DataTransform::Identity => Ok(()),
            DataTransform::Standardize { shift, scale } => {
                crate::error::check_dim("standardize shift", d, shift.len())?;
                crate::error::check_dim("standardize scale", d, scale.len())?;
                if scale.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
                    return Err(Error::invalid(
                        "standardize scales must be positive and finite",
                    ));
                }
                Ok(())
            }
            DataTransform::Logit { alpha, range } => {
                if !(*alpha >= T::zero() && *alpha < T::of(0.5)) || !(*range > T::zero()) {
                    return Err(Error::invalid(
                        "logit transform needs 0 <= alpha < 0.5 and range > 0",
                    ));
                }
                Ok(())
            }
        }
    }

    fn clamp_margin() -> T {
        T::epsilon() * T::of(16.0)
    }

    /// Data space to the coupling stack's input; returns the log-det of this map.
    pub fn apply(&self, x: &[T]) -> (Vec<T>, T) {
        match self {
            DataTransform::Identity => (x.to_vec(), T::zero()),
            DataTransform::Standardize { shift, scale } => {
                let y = x
                    .iter()
                    .zip(shift)
                    .zip(scale)
                    .map(|((&v, &m), &s)| (v - m) / s)
                    .collect();
                let ld = -scale.iter().map(|s| s.ln()).sum::<T>();
                (y, ld)
            }
            DataTransform::Logit { alpha, range } => {
                let width = T::one() - T::of(2.0) * *alpha;
                let lo = Self::clamp_margin();
                let hi = T::one() - lo;
                let base = (width / *range).ln();
                let mut ld = T::zero();
                let y = x
                    .iter()
                    .map(|&v| {
                        let p = (*alpha + width * (v / *range)).max(lo).min(hi);
                        let (lp, lq) = (p.ln(), (T::one() - p).ln());
                        ld += base - lp - lq;
                        lp - lq
                    })
                    .collect();
                (y, ld)
            }
        }
    }

    /// Inverse of [`apply`](Self::apply); returns the log-det of the inverse map.
    pub fn invert(&self, y: &[T]) -> (Vec<T>, T) {
        match self {
            DataTransform::Identity => (y.to_vec(), T::zero()),
            DataTransform::Standardize { shift, scale } => {
                let x = y
                    .iter()
                    .zip(shift)
                    .zip(scale)
                    .map(|((&v, &m), &s)| v * s + m)
                    .collect();
                (x, scale.iter().map(|s| s.ln()).sum())
            }
            DataTransform::Logit { alpha, range } => {
                let width = T::one() - T::of(2.0) * *alpha;
                let base = (*range / width).ln();
                let mut ld = T::zero();
                let x = y
                    .iter()
                    .map(|&v| {
                        // log p = -softplus(-v), log(1 - p) = -softplus(v)
                        let lp = -softplus(-v);
                        let lq = -softplus(v);
                        ld += base + lp + lq;
                        let p = lp.exp();
                        *range * (p - *alpha) / width
                    })
                    .collect();
                (x, ld)
            }
        }
    }
}

#[inline]
pub(crate) fn softplus<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}
