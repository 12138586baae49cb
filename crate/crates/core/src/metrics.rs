//! Confusion matrices and per-class / aggregate classification metrics.
//!
//! Matrices are laid out with rows = predicted class and columns = true
//! class. Under [`MetricConvention::AsPrinted`] precision of class i is
//! `M_ii / Σ_j M_ji` (normalized by the true-class column) and recall is
//! `M_ii / Σ_j M_ij` (normalized by the predicted row). That pairing is
//! what is usually called recall and precision respectively;
//! [`MetricConvention::Standard`] swaps the two denominators. F1 is the same
//! under both.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("class index {index} at position {position} is out of range for {classes} classes")]
    IndexOutOfRange {
        position: usize,
        index: usize,
        classes: usize,
    },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

impl MetricsError {
    pub fn name(&self) -> &'static str {
        match self {
            MetricsError::LengthMismatch { .. } => "LengthMismatch",
            MetricsError::IndexOutOfRange { .. } => "IndexOutOfRange",
            MetricsError::EmptyMatrix => "EmptyMatrix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricConvention {
    #[default]
    AsPrinted,
    Standard,
}

impl FromStr for MetricConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as-printed" => Ok(MetricConvention::AsPrinted),
            "standard" => Ok(MetricConvention::Standard),
            other => Err(format!("unknown metric convention {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Macro,
    Weighted,
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Aggregation::Macro),
            "weighted" => Ok(Aggregation::Weighted),
            other => Err(format!("unknown aggregation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[predicted][true]`
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Samples predicted as each class.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Samples truly in each class.
    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.num_classes())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// Counts `(predicted, true)` pairs into a `classes × classes` matrix.
pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (position, (&p, &t)) in predictions.iter().zip(labels).enumerate() {
        for index in [p, t] {
            if index >= classes {
                return Err(MetricsError::IndexOutOfRange {
                    position,
                    index,
                    classes,
                });
            }
        }
        counts[p][t] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: crate::io::default_class_names(classes),
    })
}

/// `100 · trace / total`.
pub fn accuracy(m: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = m.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    Ok(100.0 * m.trace() as f64 / total as f64)
}

/// Per-class metrics, all in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Fraction of the class's true samples that were predicted correctly.
    pub accuracy: f64,
    /// Set when a zero denominator forced precision to 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (100.0 * num as f64 / den as f64, false)
    }
}

/// Harmonic mean, 0 when either input is 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision <= 0.0 || recall <= 0.0 {
        0.0
    } else {
        2.0 / (1.0 / precision + 1.0 / recall)
    }
}

pub fn classwise_metrics(m: &ConfusionMatrix, convention: MetricConvention) -> Vec<ClassMetrics> {
    let rows = m.row_sums();
    let cols = m.column_sums();
    (0..m.num_classes())
        .map(|i| {
            let hit = m.counts[i][i];
            let (by_true, true_undef) = ratio(hit, cols[i]);
            let (by_pred, pred_undef) = ratio(hit, rows[i]);
            let ((precision, precision_undefined), (recall, recall_undefined)) = match convention
            {
                MetricConvention::AsPrinted => ((by_true, true_undef), (by_pred, pred_undef)),
                MetricConvention::Standard => ((by_pred, pred_undef), (by_true, true_undef)),
            };
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                accuracy: by_true,
                precision_undefined,
                recall_undefined,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro (unweighted) or support-weighted mean of per-class metrics.
pub fn aggregate_metrics(
    per_class: &[ClassMetrics],
    supports: &[u64],
    mode: Aggregation,
) -> AggregateMetrics {
    let weights: Vec<f64> = match mode {
        Aggregation::Macro => vec![1.0; per_class.len()],
        Aggregation::Weighted => supports.iter().map(|&s| s as f64).collect(),
    };
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return AggregateMetrics {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let mean = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().zip(&weights).map(|(c, w)| w * f(c)).sum::<f64>() / total
    };
    AggregateMetrics {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub support: u64,
    #[serde(flatten)]
    pub metrics: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misclassified {
    pub sample_id: String,
    pub predicted: usize,
    #[serde(rename = "true")]
    pub truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub convention: MetricConvention,
    pub aggregation: Aggregation,
    pub samples: u64,
    pub confusion_matrix: ConfusionMatrix,
    pub per_class: Vec<ClassReport>,
    pub aggregate: AggregateReport,
    pub misclassified: Vec<Misclassified>,
}

/// Full report for one prediction list against its labels.
pub fn evaluate(
    sample_ids: &[String],
    predictions: &[usize],
    labels: &[usize],
    class_names: &[String],
    convention: MetricConvention,
    aggregation: Aggregation,
) -> Result<EvaluationReport, MetricsError> {
    let mut m = confusion_matrix(predictions, labels, class_names.len())?;
    m.class_names = class_names.to_vec();
    let acc = accuracy(&m)?;
    let per_class = classwise_metrics(&m, convention);
    let supports = m.column_sums();
    let agg = aggregate_metrics(&per_class, &supports, aggregation);
    let misclassified = sample_ids
        .iter()
        .zip(predictions.iter().zip(labels))
        .filter(|(_, (p, t))| p != t)
        .map(|(id, (&predicted, &truth))| Misclassified {
            sample_id: id.clone(),
            predicted,
            truth,
        })
        .collect();
    Ok(EvaluationReport {
        convention,
        aggregation,
        samples: m.total(),
        per_class: class_names
            .iter()
            .zip(&supports)
            .zip(&per_class)
            .map(|((name, &support), metrics)| ClassReport {
                class: name.clone(),
                support,
                metrics: *metrics,
            })
            .collect(),
        confusion_matrix: m,
        aggregate: AggregateReport {
            precision: agg.precision,
            recall: agg.recall,
            f1: agg.f1,
            accuracy: acc,
        },
        misclassified,
    })
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .per_class
            .iter()
            .map(|c| c.class.len())
            .chain(["Aggregate".len()])
            .max()
            .unwrap_or(9);
        writeln!(
            f,
            "{:<width$}  {:>12}  {:>9}  {:>11}  {:>11}",
            "Class", "Precision(%)", "Recall(%)", "F1 Score(%)", "Accuracy(%)"
        )?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<width$}  {:>12.2}  {:>9.2}  {:>11.2}  {:>11.2}",
                c.class, c.metrics.precision, c.metrics.recall, c.metrics.f1, c.metrics.accuracy
            )?;
        }
        writeln!(
            f,
            "{:<width$}  {:>12.2}  {:>9.2}  {:>11.2}  {:>11.2}",
            "Aggregate",
            self.aggregate.precision,
            self.aggregate.recall,
            self.aggregate.f1,
            self.aggregate.accuracy
        )?;
        write!(f, "misclassified: {} of {}", self.misclassified.len(), self.samples)
    }
}
