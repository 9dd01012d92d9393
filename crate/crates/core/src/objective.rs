//! Quantile negative log-likelihood, window scores and the threshold rule.

use crate::error::{Error, Result};
use crate::tensor::{quantile_with_weights, Tensor, Var};

/// How log-likelihoods are reduced to a loss or a score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reduction {
    /// Negated `q`-quantile, `0 ≤ q < 1`.
    Quantile(f64),
    /// Negated mean, the ablation without the quantile.
    Mean,
}

impl Reduction {
    pub fn quantile(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Config(format!("quantile q = {q} outside [0, 1)")));
        }
        Ok(Reduction::Quantile(q))
    }
}

/// Linear-interpolation quantile of a nonempty slice.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty sequence".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("q = {q} outside [0, 1]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in quantile input".into()));
    }
    Ok(quantile_with_weights(values, q).0)
}

/// `−quantile(lls, q)` over every entry of `lls`.
pub fn q_nll_loss<'t>(lls: Var<'t>, q: f64) -> Result<Var<'t>> {
    lls.quantile(q)?.neg()
}

pub fn loss<'t>(lls: Var<'t>, reduction: Reduction) -> Result<Var<'t>> {
    match reduction {
        Reduction::Quantile(q) => q_nll_loss(lls, q),
        Reduction::Mean => lls.mean()?.neg(),
    }
}

/// Anomaly score of one window from its per-sensor log-likelihoods.
pub fn score(sensor_lls: &[f64], reduction: Reduction) -> Result<f64> {
    match reduction {
        Reduction::Quantile(q) => Ok(-quantile(sensor_lls, q)?),
        Reduction::Mean => {
            if sensor_lls.is_empty() {
                return Err(Error::InvalidArgument("score of an empty window".into()));
            }
            Ok(-sensor_lls.iter().sum::<f64>() / sensor_lls.len() as f64)
        }
    }
}

/// Scores of every row of a `[B, n]` log-likelihood tensor.
pub fn window_scores(lls: &Tensor, reduction: Reduction) -> Result<Vec<f64>> {
    if lls.rank() != 2 {
        return Err(Error::shape("window_scores", format!("{:?}", lls.shape())));
    }
    lls.data()
        .chunks(lls.shape()[1])
        .map(|row| score(row, reduction))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Normal,
    Anomalous,
}

impl Decision {
    pub fn is_anomalous(self) -> bool {
        self == Decision::Anomalous
    }
}

/// Normal iff `score ≤ τ`.
pub fn classify(score: f64, tau: f64) -> Decision {
    if score > tau {
        Decision::Anomalous
    } else {
        Decision::Normal
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRecord {
    pub window_id: usize,
    pub profile_id: String,
    pub start: usize,
    pub score: f64,
    pub sensor_lls: Vec<f64>,
    pub decision: Decision,
}
