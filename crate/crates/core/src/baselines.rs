//! Classical score-combination rules used as comparison points for the
//! fuzzy integrals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::integrals::FusedSample;
use crate::io::{check_alignment, DecisionScoreMatrix, IoError, Predictions};

/// Weights tuned for a three-model ensemble; used as the weighted-average
/// default when exactly three classifiers are combined.
pub const PRESET_WEIGHTS_3: [f64; 3] = [0.5, 2.0, 1.0];

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("{weights} weights for {classifiers} classifiers")]
    WeightLengthMismatch { weights: usize, classifiers: usize },
    #[error("invalid rule configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Alignment(#[from] IoError),
}

impl BaselineError {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineError::WeightLengthMismatch { .. } => "WeightLengthMismatch",
            BaselineError::InvalidConfig(_) => "InvalidConfig",
            BaselineError::Alignment(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleRule {
    Majority,
    Average,
    WeightedAverage,
    Product,
    Maximum,
}

impl EnsembleRule {
    pub const ALL: [EnsembleRule; 5] = [
        EnsembleRule::Majority,
        EnsembleRule::Average,
        EnsembleRule::WeightedAverage,
        EnsembleRule::Product,
        EnsembleRule::Maximum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleRule::Majority => "majority",
            EnsembleRule::Average => "average",
            EnsembleRule::WeightedAverage => "weighted_average",
            EnsembleRule::Product => "product",
            EnsembleRule::Maximum => "maximum",
        }
    }

    /// Row label in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            EnsembleRule::Majority => "Majority Voting",
            EnsembleRule::Average => "Average",
            EnsembleRule::WeightedAverage => "Weighted Average",
            EnsembleRule::Product => "Product Rule",
            EnsembleRule::Maximum => "Maximum Rule",
        }
    }
}

impl fmt::Display for EnsembleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnsembleRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "majority" | "majority_vote" => Ok(EnsembleRule::Majority),
            "average" | "mean" => Ok(EnsembleRule::Average),
            "weighted_average" | "weighted" => Ok(EnsembleRule::WeightedAverage),
            "product" => Ok(EnsembleRule::Product),
            "maximum" | "max" => Ok(EnsembleRule::Maximum),
            other => Err(format!("unknown ensemble rule {other:?}")),
        }
    }
}

/// A rule plus its weights; weights exist only for the weighted average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRuleConfig {
    rule: EnsembleRule,
    weights: Option<Vec<f64>>,
}

impl EnsembleRuleConfig {
    /// Any rule except the weighted average.
    pub fn new(rule: EnsembleRule) -> Result<Self, BaselineError> {
        if rule == EnsembleRule::WeightedAverage {
            return Err(BaselineError::InvalidConfig(
                "weighted_average needs weights".into(),
            ));
        }
        Ok(EnsembleRuleConfig { rule, weights: None })
    }

    pub fn weighted(weights: Vec<f64>) -> Result<Self, BaselineError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BaselineError::InvalidConfig(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(BaselineError::InvalidConfig(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(EnsembleRuleConfig {
            rule: EnsembleRule::WeightedAverage,
            weights: Some(weights),
        })
    }

    pub fn rule(&self) -> EnsembleRule {
        self.rule
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// Most frequent predicted class. Ties go to the tied class with the largest
/// summed confidence across all classifiers, then to the lowest index.
pub fn majority_vote<V: AsRef<[f64]>>(predictions: &[usize], confidences: &[V]) -> usize {
    let classes = confidences
        .iter()
        .map(|c| c.as_ref().len())
        .max()
        .unwrap_or(0)
        .max(predictions.iter().map(|p| p + 1).max().unwrap_or(0));
    let mut votes = vec![0usize; classes];
    for &p in predictions {
        votes[p] += 1;
    }
    let mut mass = vec![0.0; classes];
    for row in confidences {
        for (m, v) in mass.iter_mut().zip(row.as_ref()) {
            *m += v;
        }
    }
    let mut best = 0;
    for c in 1..classes {
        if votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best]) {
            best = c;
        }
    }
    best
}

fn combine_row(rows: &[&[f64]], config: &EnsembleRuleConfig) -> FusedSample {
    let classes = rows[0].len();
    let n = rows.len() as f64;
    let column = |c: usize| rows.iter().map(move |r| r[c]);
    match config.rule {
        EnsembleRule::Majority => {
            let preds: Vec<usize> = rows.iter().map(|r| crate::argmax(r)).collect();
            let mut fractions = vec![0.0; classes];
            for &p in &preds {
                fractions[p] += 1.0 / n;
            }
            FusedSample {
                fused_scores: fractions,
                predicted_class: majority_vote(&preds, rows),
            }
        }
        EnsembleRule::Average => {
            FusedSample::from_scores((0..classes).map(|c| column(c).sum::<f64>() / n).collect())
        }
        EnsembleRule::WeightedAverage => {
            let w = config.weights.as_deref().unwrap_or_default();
            let total: f64 = w.iter().sum();
            FusedSample::from_scores(
                (0..classes)
                    .map(|c| column(c).zip(w).map(|(s, wi)| wi * s).sum::<f64>() / total)
                    .collect(),
            )
        }
        EnsembleRule::Product => {
            FusedSample::from_scores((0..classes).map(|c| column(c).product()).collect())
        }
        EnsembleRule::Maximum => FusedSample::from_scores(
            (0..classes)
                .map(|c| column(c).fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        ),
    }
}

pub fn combine_scores(
    matrices: &[DecisionScoreMatrix],
    config: &EnsembleRuleConfig,
) -> Result<Predictions, BaselineError> {
    combine_scores_with(matrices, config, Execution::default())
}

/// Applies `config` sample by sample over aligned matrices.
pub fn combine_scores_with(
    matrices: &[DecisionScoreMatrix],
    config: &EnsembleRuleConfig,
    exec: Execution,
) -> Result<Predictions, BaselineError> {
    check_alignment(matrices)?;
    if let Some(w) = &config.weights {
        if w.len() != matrices.len() {
            return Err(BaselineError::WeightLengthMismatch {
                weights: w.len(),
                classifiers: matrices.len(),
            });
        }
    }
    let samples = exec::map_indexed(matrices[0].num_samples(), exec, |s| {
        let rows: Vec<&[f64]> = matrices.iter().map(|m| m.scores[s].as_slice()).collect();
        combine_row(&rows, config)
    });
    Ok(Predictions {
        sample_ids: matrices[0].sample_ids.clone(),
        samples,
    })
}
