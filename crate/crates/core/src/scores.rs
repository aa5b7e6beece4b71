// SPDX-License-Identifier: Apache-2.0

//! Vector-valued nonconformity scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Residual,
    Ensemble,
    Classification,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector<T> {
    pub values: Vec<T>,
    pub kind: ScoreKind,
}

impl<T: Scalar> ScoreVector<T> {
    /// Wraps a precomputed score, e.g. one row of a score table.
    pub fn custom(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("empty score vector".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite score entry".into()));
        }
        Ok(Self {
            values,
            kind: ScoreKind::Custom,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn difference<T: Scalar>(y: &[T], prediction: &[T], kind: ScoreKind) -> Result<ScoreVector<T>> {
    if y.len() != prediction.len() {
        return Err(Error::Shape(format!(
            "label of dimension {} against prediction of dimension {}",
            y.len(),
            prediction.len()
        )));
    }
    let mut score = ScoreVector::custom(y.iter().zip(prediction).map(|(&a, &b)| a - b).collect())?;
    score.kind = kind;
    Ok(score)
}

/// Multi-output residual `y - yhat(x)`.
pub fn residual_score<T: Scalar>(y: &[T], prediction: &[T]) -> Result<ScoreVector<T>> {
    difference(y, prediction, ScoreKind::Residual)
}

/// One residual per model: `(y - yhat_1(x), ..., y - yhat_d(x))`.
pub fn ensemble_score<T: Scalar>(y: T, predictions: &[T]) -> Result<ScoreVector<T>> {
    let mut score = ScoreVector::custom(predictions.iter().map(|&p| y - p).collect())?;
    score.kind = ScoreKind::Ensemble;
    Ok(score)
}

/// One-hot label minus predicted class probabilities; entries sum to 0.
pub fn classification_score<T: Scalar>(onehot: &[T], probs: &[T]) -> Result<ScoreVector<T>> {
    let tol = T::of(1e-9);
    if probs.iter().any(|&p| p < T::zero()) {
        return Err(Error::Input("negative class probability".into()));
    }
    let total: T = probs.iter().copied().sum();
    if (total - T::one()).abs() > tol {
        return Err(Error::Input(format!("probabilities sum to {total}, not 1")));
    }
    let ones = onehot.iter().filter(|&&y| y == T::one()).count();
    let zeros = onehot.iter().filter(|&&y| y == T::zero()).count();
    if ones != 1 || ones + zeros != onehot.len() {
        return Err(Error::Input("label is not one-hot".into()));
    }
    difference(onehot, probs, ScoreKind::Classification)
}
