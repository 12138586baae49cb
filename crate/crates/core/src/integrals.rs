//! Sugeno and Choquet fuzzy-integral fusion of classifier scores.
//!
//! For each class independently the N classifier scores are sorted in
//! descending order, the densities are permuted to match, and the integral
//! is taken against the resulting measure chain. The fused class scores are
//! not renormalized; the prediction is their argmax.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::io::{check_alignment, DecisionScoreMatrix, IoError, Predictions};
use crate::measures::{cumulative_measure, FuzzyDensitySet, MeasureChain};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("length mismatch: {scores} scores vs {measures} measures")]
    LengthMismatch { scores: usize, measures: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Alignment(#[from] IoError),
}

impl FusionError {
    pub fn name(&self) -> &'static str {
        match self {
            FusionError::LengthMismatch { .. } => "LengthMismatch",
            FusionError::ShapeMismatch(_) => "ShapeMismatch",
            FusionError::Alignment(e) => e.name(),
        }
    }
}

/// Which fuzzy integral to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegralKind {
    #[default]
    Sugeno,
    Choquet,
    /// Choquet integral evaluated with the running-sum recurrence.
    Alg1,
}

impl IntegralKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IntegralKind::Sugeno => "sugeno",
            IntegralKind::Choquet => "choquet",
            IntegralKind::Alg1 => "alg1",
        }
    }
}

impl fmt::Display for IntegralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntegralKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sugeno" => Ok(IntegralKind::Sugeno),
            "choquet" => Ok(IntegralKind::Choquet),
            "alg1" => Ok(IntegralKind::Alg1),
            other => Err(format!("unknown integral {other:?} (sugeno|choquet|alg1)")),
        }
    }
}

/// Fused class scores for one sample and their argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedSample {
    pub fused_scores: Vec<f64>,
    pub predicted_class: usize,
}

impl FusedSample {
    pub fn from_scores(fused_scores: Vec<f64>) -> Self {
        let predicted_class = crate::argmax(&fused_scores);
        FusedSample {
            fused_scores,
            predicted_class,
        }
    }
}

fn check_lengths(scores: &[f64], chain: &MeasureChain) -> Result<(), FusionError> {
    if scores.len() != chain.len() {
        return Err(FusionError::LengthMismatch {
            scores: scores.len(),
            measures: chain.len(),
        });
    }
    Ok(())
}

/// `Σ_k S_k·(g(X_k) − g(X_{k−1}))` with `g(X_0) = 0`.
pub fn choquet(sorted_scores: &[f64], chain: &MeasureChain) -> Result<f64, FusionError> {
    check_lengths(sorted_scores, chain)?;
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (&s, &g) in sorted_scores.iter().zip(&chain.values) {
        acc += s * (g - prev);
        prev = g;
    }
    Ok(acc)
}

/// `max_k min(S_k, g(X_k))`.
pub fn sugeno(sorted_scores: &[f64], chain: &MeasureChain) -> Result<f64, FusionError> {
    check_lengths(sorted_scores, chain)?;
    Ok(sorted_scores
        .iter()
        .zip(&chain.values)
        .map(|(&s, &g)| s.min(g))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Choquet value computed in one pass that grows the measure and the
/// prediction together, without materializing the chain.
pub fn choquet_recurrence(
    sorted_scores: &[f64],
    sorted_densities: &[f64],
    lambda: f64,
) -> Result<f64, FusionError> {
    if sorted_scores.len() != sorted_densities.len() {
        return Err(FusionError::LengthMismatch {
            scores: sorted_scores.len(),
            measures: sorted_densities.len(),
        });
    }
    let Some((&d0, rest)) = sorted_densities.split_first() else {
        return Ok(0.0);
    };
    let mut f_prev = d0;
    let mut pred = sorted_scores[0] * d0;
    for (&s, &mu) in sorted_scores[1..].iter().zip(rest) {
        let f_current = f_prev + mu + lambda * mu * f_prev;
        pred += s * (f_current - f_prev);
        f_prev = f_current;
    }
    Ok(pred)
}

/// Classifier indices ordered by descending score, ties by index.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Integral of one class's per-classifier scores.
pub fn fuse_class(
    scores: &[f64],
    densities: &FuzzyDensitySet,
    kind: IntegralKind,
) -> Result<f64, FusionError> {
    if scores.len() != densities.len() {
        return Err(FusionError::LengthMismatch {
            scores: scores.len(),
            measures: densities.len(),
        });
    }
    if densities.is_trivially_normalized() {
        return Ok(scores[0]);
    }
    let order = descending_order(scores);
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let mu: Vec<f64> = order.iter().map(|&i| densities.densities()[i]).collect();
    match kind {
        IntegralKind::Alg1 => choquet_recurrence(&sorted, &mu, densities.lambda()),
        IntegralKind::Choquet => choquet(&sorted, &cumulative_measure(&mu, densities.lambda())),
        IntegralKind::Sugeno => sugeno(&sorted, &cumulative_measure(&mu, densities.lambda())),
    }
}

/// Fuses one sample: `score_vectors[i]` is classifier i's class-score vector.
pub fn fuse_sample<V: AsRef<[f64]>>(
    score_vectors: &[V],
    densities: &FuzzyDensitySet,
    kind: IntegralKind,
) -> Result<FusedSample, FusionError> {
    if score_vectors.len() != densities.len() {
        return Err(FusionError::LengthMismatch {
            scores: score_vectors.len(),
            measures: densities.len(),
        });
    }
    let classes = score_vectors.first().map_or(0, |v| v.as_ref().len());
    if let Some(bad) = score_vectors.iter().position(|v| v.as_ref().len() != classes) {
        return Err(FusionError::ShapeMismatch(format!(
            "classifier {bad} has {} classes, expected {classes}",
            score_vectors[bad].as_ref().len()
        )));
    }
    let mut column = vec![0.0; score_vectors.len()];
    let mut fused = Vec::with_capacity(classes);
    for c in 0..classes {
        for (slot, v) in column.iter_mut().zip(score_vectors) {
            *slot = v.as_ref()[c];
        }
        fused.push(fuse_class(&column, densities, kind)?);
    }
    Ok(FusedSample::from_scores(fused))
}

/// [`fuse_dataset_with`] using the default execution mode.
pub fn fuse_dataset(
    matrices: &[DecisionScoreMatrix],
    densities: &FuzzyDensitySet,
    kind: IntegralKind,
) -> Result<Predictions, FusionError> {
    fuse_dataset_with(matrices, densities, kind, Execution::default())
}

/// Fuses every sample of N aligned score matrices; output follows input order.
pub fn fuse_dataset_with(
    matrices: &[DecisionScoreMatrix],
    densities: &FuzzyDensitySet,
    kind: IntegralKind,
    exec: Execution,
) -> Result<Predictions, FusionError> {
    check_alignment(matrices)?;
    if matrices.len() != densities.len() {
        return Err(FusionError::LengthMismatch {
            scores: matrices.len(),
            measures: densities.len(),
        });
    }
    let n = matrices[0].num_samples();
    let samples = exec::try_map_indexed(n, exec, |s| {
        let rows: Vec<&[f64]> = matrices.iter().map(|m| m.scores[s].as_slice()).collect();
        fuse_sample(&rows, densities, kind)
    })?;
    Ok(Predictions {
        sample_ids: matrices[0].sample_ids.clone(),
        samples,
    })
}
