//! k-nearest-neighbour baselines in pixel space or in flow latent space.

use std::collections::BTreeMap;

use super::Classifier;
use crate::data::Dataset;
use crate::flow::FlowModel;
use crate::scalar::check_finite;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnSpace {
    Pixel,
    Latent,
}

impl KnnSpace {
    pub fn name(self) -> &'static str {
        match self {
            KnnSpace::Pixel => "pixel",
            KnnSpace::Latent => "latent",
        }
    }
}

/// Euclidean k-NN over a labeled reference set. Latent-space references are
/// encoded once at construction.
pub struct KnnClassifier<'a, T> {
    space: KnnSpace,
    k: usize,
    model: Option<&'a FlowModel<T>>,
    refs: Vec<Vec<T>>,
    labels: Vec<i64>,
}

impl<'a, T: Scalar> KnnClassifier<'a, T> {
    pub fn new(
        space: KnnSpace,
        model: &'a FlowModel<T>,
        labeled: &Dataset<T>,
        k: usize,
    ) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::Empty("k-NN reference set"));
        }
        if k == 0 || k > labeled.len() {
            return Err(Error::invalid(format!(
                "k = {k} must be between 1 and the {} labeled examples",
                labeled.len()
            )));
        }
        let labels = labeled.require_labels()?.to_vec();
        let (model, refs) = match space {
            KnnSpace::Pixel => (None, labeled.points().to_vec()),
            KnnSpace::Latent => {
                crate::error::check_dim("k-NN reference set", model.dim(), labeled.dim())?;
                let z = labeled
                    .points()
                    .iter()
                    .map(|x| model.inverse(x))
                    .collect::<Result<Vec<_>>>()?;
                (Some(model), z)
            }
        };
        Ok(Self {
            space,
            k,
            model,
            refs,
            labels,
        })
    }

    pub fn space(&self) -> KnnSpace {
        self.space
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn vote(&self, q: &[T]) -> Result<i64> {
        crate::error::check_dim("k-NN query", self.refs[0].len(), q.len())?;
        let mut dist: Vec<(T, usize)> = self
            .refs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d2 = r.iter().zip(q).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
                (d2, i)
            })
            .collect();
        // stable: equal distances keep dataset order
        dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for &(_, i) in &dist[..self.k] {
            *counts.entry(self.labels[i]).or_default() += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        Ok(counts
            .into_iter()
            .find(|&(_, c)| c == top)
            .map(|(l, _)| l)
            .expect("k >= 1"))
    }
}

impl<T: Scalar> Classifier<T> for KnnClassifier<'_, T> {
    fn predict(&self, x: &[T]) -> Result<i64> {
        match self.model {
            None => {
                check_finite("k-NN query", x)?;
                self.vote(x)
            }
            Some(m) => {
                let z = m.inverse(x)?;
                check_finite("test latent", &z)?;
                self.vote(&z)
            }
        }
    }
}

/// Majority label among the `k` nearest labeled examples to `x`; vote ties go
/// to the lowest label and distance ties to the earlier example.
pub fn knn_predict<T: Scalar>(
    space: KnnSpace,
    model: &FlowModel<T>,
    labeled: &Dataset<T>,
    x: &[T],
    k: usize,
) -> Result<i64> {
    KnnClassifier::new(space, model, labeled, k)?.predict(x)
}
