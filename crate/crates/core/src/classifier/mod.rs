//! Few-shot classification from posterior predictives, plus k-NN baselines.

pub mod bank;
pub mod eval;
pub mod knn;

pub use bank::{
    fit, load_bank, predict, save_bank, ClassEntry, ClassifierBank, TransflowClassifier,
};
pub use eval::{evaluate, ClassAccuracy, EvalContext, EvalReport};
pub use knn::{knn_predict, KnnClassifier, KnnSpace};

use crate::{Result, Scalar};

pub trait Classifier<T: Scalar> {
    fn predict(&self, x: &[T]) -> Result<i64>;
}
