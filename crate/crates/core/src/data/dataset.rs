use std::collections::BTreeMap;

use rand::Rng;

use crate::rng::{permutation, seeded};
use crate::{Error, Result, Scalar};

/// Ordered collection of equal-length real vectors with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    d: usize,
    points: Vec<Vec<T>>,
    labels: Option<Vec<i64>>,
    provenance: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        points: Vec<Vec<T>>,
        labels: Option<Vec<i64>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("dataset"))?;
        let d = first.len();
        if d == 0 {
            return Err(Error::invalid(
                "dataset points must have positive dimension",
            ));
        }
        for p in &points {
            crate::error::check_dim("dataset row", d, p.len())?;
        }
        if let Some(l) = &labels {
            crate::error::check_dim("dataset labels", points.len(), l.len())?;
        }
        Ok(Self {
            d,
            points,
            labels,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<i64> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn require_labels(&self) -> Result<&[i64]> {
        self.labels()
            .ok_or_else(|| Error::invalid(format!("dataset '{}' has no labels", self.provenance)))
    }

    /// Indices of each label, in dataset order, keyed by ascending label.
    pub fn class_indices(&self) -> Result<BTreeMap<i64, Vec<usize>>> {
        let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.require_labels()?.iter().enumerate() {
            map.entry(l).or_default().push(i);
        }
        Ok(map)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::new(points, labels, self.provenance.clone())
    }

    /// Points with the given label.
    pub fn class_subset(&self, label: i64) -> Result<Self> {
        let idx = self.class_indices()?.remove(&label).unwrap_or_default();
        if idx.is_empty() {
            return Err(Error::Class {
                label,
                message: "no examples".into(),
            });
        }
        self.subset(&idx)
    }

    /// Seeded class-stratified draw of `m` examples per class (without
    /// replacement). Classes appear in ascending label order.
    pub fn stratified_subsample(&self, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("per-class count m must be at least 1"));
        }
        let mut rng = seeded(seed);
        let mut chosen = Vec::new();
        for (label, idx) in self.class_indices()? {
            if idx.len() < m {
                return Err(Error::Class {
                    label,
                    message: format!(
                        "requested m = {m} but class has only {} examples",
                        idx.len()
                    ),
                });
            }
            let perm = permutation(&mut rng, idx.len());
            chosen.extend(perm[..m].iter().map(|&p| idx[p]));
        }
        self.subset(&chosen)
    }

    /// Copy with `amplitude * U[0, 1)` added to every coordinate.
    pub fn dequantized(&self, amplitude: f64, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let a = T::of(amplitude);
        let points = self
            .points
            .iter()
            .map(|p| {
                p.iter()
                    .map(|&v| v + a * T::of(rng.random::<f64>()))
                    .collect()
            })
            .collect();
        Self {
            points,
            ..self.clone()
        }
    }

    /// Convert to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            d: self.d,
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|v| U::of(v.to_f64_lossy())).collect())
                .collect(),
            labels: self.labels.clone(),
            provenance: self.provenance.clone(),
        }
    }
}
