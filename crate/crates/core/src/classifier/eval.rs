use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::data::Dataset;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub label: i64,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Settings recorded alongside the scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalContext {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_over_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub context: EvalContext,
    pub n: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
    pub per_class: Vec<ClassAccuracy>,
    /// Row/column label order of `confusion`.
    pub labels: Vec<i64>,
    /// `confusion[i][j]`: true label `labels[i]` predicted as `labels[j]`.
    pub confusion: Vec<Vec<usize>>,
    /// Test points whose latent (or input) was non-finite; scored as wrong.
    pub nonfinite: usize,
}

/// Score `clf` on a labeled test set. Degenerate points (non-finite input or
/// latent) count as misclassified and are tallied in `nonfinite`.
pub fn evaluate<T: Scalar, C: Classifier<T> + ?Sized>(
    clf: &C,
    test: &Dataset<T>,
    context: EvalContext,
) -> Result<EvalReport> {
    let truth = test.require_labels()?;
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut preds = Vec::with_capacity(test.len());
    for x in test.points() {
        match clf.predict(x) {
            Ok(l) => preds.push(Some(l)),
            Err(Error::NonFinite { .. }) => preds.push(None),
            Err(e) => return Err(e),
        }
    }
    let mut label_set: Vec<i64> = truth
        .iter()
        .copied()
        .chain(preds.iter().flatten().copied())
        .collect();
    label_set.sort_unstable();
    label_set.dedup();
    let pos: BTreeMap<i64, usize> = label_set.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let k = label_set.len();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut per: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    let mut nonfinite = 0;
    let mut correct = 0;
    for (&t, p) in truth.iter().zip(&preds) {
        let e = per.entry(t).or_default();
        e.0 += 1;
        match p {
            Some(l) => {
                confusion[pos[&t]][pos[l]] += 1;
                if *l == t {
                    e.1 += 1;
                    correct += 1;
                }
            }
            None => nonfinite += 1,
        }
    }
    let per_class = per
        .into_iter()
        .map(|(label, (n, c))| ClassAccuracy {
            label,
            n,
            correct: c,
            accuracy: c as f64 / n as f64,
        })
        .collect();
    Ok(EvalReport {
        context,
        n: test.len(),
        correct,
        overall_accuracy: correct as f64 / test.len() as f64,
        per_class,
        labels: label_set,
        confusion,
        nonfinite,
    })
}
