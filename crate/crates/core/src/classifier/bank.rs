//! Training-free classifier: one posterior predictive per class in the latent
//! space of a fixed flow; a point goes to the class whose predictive gives its
//! latent the highest density.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::data::Dataset;
use crate::flow::FlowModel;
use crate::inference::file::{PosteriorRecord, Provenance};
use crate::inference::{
    encode_evidence, posterior_isotropic, posterior_predictive, GaussianSpec, LambdaPolicy,
    LikelihoodConfig,
};
use crate::scalar::check_finite;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry<T> {
    pub label: i64,
    pub m: usize,
    pub lambda: f64,
    pub predictive: GaussianSpec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBank<T> {
    classes: Vec<ClassEntry<T>>,
    policy: LambdaPolicy,
    checkpoint_sha256: Option<String>,
}

impl<T: Scalar> ClassifierBank<T> {
    /// Classes are kept in ascending label order.
    pub fn new(
        mut classes: Vec<ClassEntry<T>>,
        policy: LambdaPolicy,
        checkpoint_sha256: Option<String>,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Empty("classifier bank"));
        }
        classes.sort_by_key(|c| c.label);
        let d = classes[0].predictive.dim();
        for w in classes.windows(2) {
            if w[0].label == w[1].label {
                return Err(Error::invalid(format!(
                    "duplicate class label {}",
                    w[0].label
                )));
            }
        }
        for c in &classes {
            crate::error::check_dim("class predictive", d, c.predictive.dim())?;
        }
        Ok(Self {
            classes,
            policy,
            checkpoint_sha256,
        })
    }

    pub fn classes(&self) -> &[ClassEntry<T>] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.classes[0].predictive.dim()
    }

    pub fn policy(&self) -> LambdaPolicy {
        self.policy
    }

    pub fn checkpoint_sha256(&self) -> Option<&str> {
        self.checkpoint_sha256.as_deref()
    }

    /// Log-density of latent `z` under each class predictive, in class order.
    pub fn scores(&self, z: &[T]) -> Result<Vec<T>> {
        self.classes
            .iter()
            .map(|c| c.predictive.log_density(z))
            .collect()
    }

    /// Arg-max class for latent `z`; the lowest label wins ties.
    pub fn predict_latent(&self, z: &[T]) -> Result<i64> {
        check_finite("test latent", z)?;
        let scores = self.scores(z)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        Ok(self.classes[best].label)
    }
}

/// Build one posterior predictive per class of `labeled`: encode the class's
/// examples, condition `N(0, I)` on them with `λ` from `policy` and that
/// class's own `m`, then add the likelihood covariance.
pub fn fit<T: Scalar>(
    model: &FlowModel<T>,
    labeled: &Dataset<T>,
    policy: LambdaPolicy,
    checkpoint_sha256: Option<String>,
) -> Result<ClassifierBank<T>> {
    crate::error::check_dim("labeled data", model.dim(), labeled.dim())?;
    let mut classes = Vec::new();
    for (label, idx) in labeled.class_indices()? {
        let xs: Vec<Vec<T>> = idx.iter().map(|&i| labeled.point(i).to_vec()).collect();
        let ev = encode_evidence(model, &xs)?;
        let lambda = policy.resolve(ev.m())?;
        let post = posterior_isotropic(&ev, T::of(lambda))?;
        let lik = LikelihoodConfig::isotropic(T::of(lambda))?;
        classes.push(ClassEntry {
            label,
            m: ev.m(),
            lambda,
            predictive: posterior_predictive(&post, &lik)?,
        });
    }
    ClassifierBank::new(classes, policy, checkpoint_sha256)
}

/// Predict the label of data point `x`.
pub fn predict<T: Scalar>(bank: &ClassifierBank<T>, model: &FlowModel<T>, x: &[T]) -> Result<i64> {
    crate::error::check_dim("classifier input", bank.dim(), x.len())?;
    bank.predict_latent(&model.inverse(x)?)
}

pub struct TransflowClassifier<'a, T> {
    pub bank: &'a ClassifierBank<T>,
    pub model: &'a FlowModel<T>,
}

impl<T: Scalar> Classifier<T> for TransflowClassifier<'_, T> {
    fn predict(&self, x: &[T]) -> Result<i64> {
        predict(self.bank, self.model, x)
    }
}

pub const BANK_FORMAT: &str = "transflow-bank";
pub const BANK_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LambdaPolicyRecord {
    Absolute(f64),
    FractionOfM(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankClassRecord {
    pub label: i64,
    pub m: usize,
    pub lambda: f64,
    pub predictive: PosteriorRecord,
}

/// Bank manifest plus one embedded posterior record per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRecord {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub lambda_policy: LambdaPolicyRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_sha256: Option<String>,
    pub classes: Vec<BankClassRecord>,
}

impl BankRecord {
    pub fn from_bank<T: Scalar>(bank: &ClassifierBank<T>) -> Self {
        let classes = bank
            .classes()
            .iter()
            .map(|c| BankClassRecord {
                label: c.label,
                m: c.m,
                lambda: c.lambda,
                predictive: PosteriorRecord::from_spec(
                    &c.predictive,
                    Provenance::conditioned(
                        "posterior_predictive",
                        c.lambda,
                        c.m,
                        bank.checkpoint_sha256.clone(),
                    ),
                ),
            })
            .collect();
        Self {
            format: BANK_FORMAT.into(),
            version: BANK_VERSION,
            d: bank.dim(),
            lambda_policy: match bank.policy {
                LambdaPolicy::Absolute(v) => LambdaPolicyRecord::Absolute(v),
                LambdaPolicy::FractionOfM(v) => LambdaPolicyRecord::FractionOfM(v),
            },
            checkpoint_sha256: bank.checkpoint_sha256.clone(),
            classes,
        }
    }

    pub fn to_bank<T: Scalar>(&self) -> Result<ClassifierBank<T>> {
        if self.format != BANK_FORMAT || self.version != BANK_VERSION {
            return Err(Error::Unsupported(format!(
                "expected a {BANK_FORMAT} v{BANK_VERSION} file, found format '{}' version {}",
                self.format, self.version
            )));
        }
        let classes = self
            .classes
            .iter()
            .map(|c| {
                let predictive = c.predictive.to_spec()?;
                crate::error::check_dim("bank class", self.d, predictive.dim())?;
                Ok(ClassEntry {
                    label: c.label,
                    m: c.m,
                    lambda: c.lambda,
                    predictive,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let policy = match self.lambda_policy {
            LambdaPolicyRecord::Absolute(v) => LambdaPolicy::Absolute(v),
            LambdaPolicyRecord::FractionOfM(v) => LambdaPolicy::FractionOfM(v),
        };
        ClassifierBank::new(classes, policy, self.checkpoint_sha256.clone())
    }
}

pub fn save_bank<T: Scalar>(bank: &ClassifierBank<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&BankRecord::from_bank(bank))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_bank<T: Scalar>(path: impl AsRef<Path>) -> Result<ClassifierBank<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str::<BankRecord>(&text)?.to_bank()
}
