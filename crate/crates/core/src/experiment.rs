//! Rule comparison and density sweeps over one labelled experiment.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{combine_scores_with, EnsembleRule, EnsembleRuleConfig, PRESET_WEIGHTS_3};
use crate::exec::{self, Execution};
use crate::integrals::{fuse_dataset_with, IntegralKind};
use crate::io::{check_alignment, load_labels, load_scores, DecisionScoreMatrix, ExperimentManifest, LoadOptions, Predictions};
use crate::measures::{validate_densities, ClampPolicy, FuzzyDensitySet};
use crate::metrics::{accuracy, confusion_matrix};

/// Default cap on the number of density tuples a sweep may evaluate.
pub const DEFAULT_MAX_COMBINATIONS: usize = 10_000;

/// Default per-slot density grid.
pub const DEFAULT_GRID: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("sweep would evaluate {combinations} density tuples (cap {cap})")]
    SweepTooLarge { combinations: u128, cap: usize },
    #[error("density grid is empty")]
    EmptyGrid,
    #[error("{0}")]
    UnknownRule(String),
    #[error("{0}")]
    MissingLabels(String),
    #[error("{densities} densities for {classifiers} classifiers")]
    DensityCountMismatch { densities: usize, classifiers: usize },
}

impl ExperimentError {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentError::SweepTooLarge { .. } => "SweepTooLarge",
            ExperimentError::EmptyGrid => "EmptyGrid",
            ExperimentError::UnknownRule(_) => "UnknownRule",
            ExperimentError::MissingLabels(_) => "MissingLabels",
            ExperimentError::DensityCountMismatch { .. } => "DensityCountMismatch",
        }
    }
}

/// Loaded, aligned inputs of one labelled experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub matrices: Vec<DecisionScoreMatrix>,
    /// True labels in the matrices' sample order.
    pub labels: Vec<usize>,
    pub densities: Option<Vec<f64>>,
    pub integral: IntegralKind,
    pub rules: Vec<String>,
}

impl Experiment {
    pub fn new(
        matrices: Vec<DecisionScoreMatrix>,
        labels: Vec<usize>,
    ) -> crate::Result<Self> {
        check_alignment(&matrices)?;
        if labels.len() != matrices[0].num_samples() {
            return Err(ExperimentError::MissingLabels(format!(
                "{} labels for {} samples",
                labels.len(),
                matrices[0].num_samples()
            ))
            .into());
        }
        Ok(Experiment {
            matrices,
            labels,
            densities: None,
            integral: IntegralKind::default(),
            rules: Vec::new(),
        })
    }

    /// Loads score files and a labels file.
    pub fn load<P: AsRef<Path>>(
        score_files: &[P],
        labels_file: Option<&Path>,
        opts: LoadOptions,
    ) -> crate::Result<Self> {
        let matrices = score_files
            .iter()
            .map(|p| load_scores(p, opts))
            .collect::<Result<Vec<_>, _>>()?;
        check_alignment(&matrices)?;
        let labels = match labels_file {
            Some(path) => load_labels(path)?.aligned_to(&matrices[0].sample_ids)?,
            None => matrices[0].complete_labels().ok_or_else(|| {
                ExperimentError::MissingLabels("no labels file and score file has empty labels".into())
            })?,
        };
        Experiment::new(matrices, labels)
    }

    pub fn from_manifest(m: &ExperimentManifest, opts: LoadOptions) -> crate::Result<Self> {
        let mut exp = Experiment::load(&m.score_files, Some(&m.labels_file), opts)?;
        exp.densities = m.densities.clone();
        exp.integral = m.integral;
        exp.rules = m.rules.clone();
        Ok(exp)
    }

    pub fn num_classes(&self) -> usize {
        self.matrices[0].num_classes()
    }

    pub fn classifier_names(&self) -> Vec<String> {
        self.matrices.iter().map(|m| m.classifier_name.clone()).collect()
    }

    /// Accuracy (percent) of a prediction list against the labels.
    pub fn accuracy_of(&self, predicted: &[usize]) -> crate::Result<f64> {
        let m = confusion_matrix(predicted, &self.labels, self.num_classes())?;
        Ok(accuracy(&m)?)
    }

    /// Accuracy (percent) of each classifier on its own.
    pub fn classifier_accuracies(&self) -> crate::Result<Vec<f64>> {
        self.matrices
            .iter()
            .map(|m| self.accuracy_of(&m.argmax_predictions()))
            .collect()
    }

    /// Configured densities, or each classifier's accuracy as a fraction.
    pub fn densities_or_accuracy(&self) -> crate::Result<Vec<f64>> {
        match &self.densities {
            Some(d) => {
                if d.len() != self.matrices.len() {
                    return Err(ExperimentError::DensityCountMismatch {
                        densities: d.len(),
                        classifiers: self.matrices.len(),
                    }
                    .into());
                }
                Ok(d.clone())
            }
            None => Ok(self
                .classifier_accuracies()?
                .into_iter()
                .map(|a| a / 100.0)
                .collect()),
        }
    }
}

/// One row of a comparison: a baseline rule or a fuzzy integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareRule {
    Baseline(EnsembleRule),
    Fuzzy(IntegralKind),
}

impl CompareRule {
    /// Table order: the five baselines, then Choquet, then Sugeno.
    pub fn all() -> Vec<CompareRule> {
        EnsembleRule::ALL
            .into_iter()
            .map(CompareRule::Baseline)
            .chain([
                CompareRule::Fuzzy(IntegralKind::Choquet),
                CompareRule::Fuzzy(IntegralKind::Sugeno),
            ])
            .collect()
    }

    pub fn key(self) -> &'static str {
        match self {
            CompareRule::Baseline(r) => r.as_str(),
            CompareRule::Fuzzy(k) => k.as_str(),
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            CompareRule::Baseline(r) => r.display_name(),
            CompareRule::Fuzzy(IntegralKind::Choquet) => "Choquet Fuzzy Integral",
            CompareRule::Fuzzy(IntegralKind::Sugeno) => "Sugeno Fuzzy Integral",
            CompareRule::Fuzzy(IntegralKind::Alg1) => "Choquet Fuzzy Integral (recurrence)",
        }
    }

    /// Parses `all` or a comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<CompareRule>, ExperimentError> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(CompareRule::all());
        }
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse())
            .collect()
    }
}

impl FromStr for CompareRule {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(k) = s.parse::<IntegralKind>() {
            return Ok(CompareRule::Fuzzy(k));
        }
        s.parse::<EnsembleRule>()
            .map(CompareRule::Baseline)
            .map_err(ExperimentError::UnknownRule)
    }
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub rules: Vec<CompareRule>,
    /// Weighted-average weights; defaults to the three-model preset for
    /// N = 3 and equal weights otherwise.
    pub weights: Option<Vec<f64>>,
    /// Fuzzy densities; defaults to [`Experiment::densities_or_accuracy`].
    pub densities: Option<Vec<f64>>,
    pub policy: ClampPolicy,
    pub exec: Execution,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            rules: CompareRule::all(),
            weights: None,
            densities: None,
            policy: ClampPolicy::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rule: String,
    pub key: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRow {
    pub classifier: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub samples: usize,
    pub classifiers: Vec<ClassifierRow>,
    pub weights: Vec<f64>,
    pub densities: Vec<f64>,
    pub lambda: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn accuracy_of(&self, key: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.key == key).map(|r| r.accuracy)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.rows.iter().map(|r| r.rule.len()).max().unwrap_or(0).max(17);
        writeln!(f, "{:<w$}  {:>11}", "Ensemble Technique", "Accuracy(%)")?;
        for r in &self.rows {
            writeln!(f, "{:<w$}  {:>11.2}", r.rule, r.accuracy)?;
        }
        write!(f, "base classifiers:")?;
        for c in &self.classifiers {
            write!(f, " {}={:.2}", c.classifier, c.accuracy)?;
        }
        Ok(())
    }
}

/// Predictions of one comparison rule.
pub fn predict_rule(
    exp: &Experiment,
    rule: CompareRule,
    weights: &[f64],
    densities: &FuzzyDensitySet,
    exec: Execution,
) -> crate::Result<Predictions> {
    Ok(match rule {
        CompareRule::Baseline(EnsembleRule::WeightedAverage) => combine_scores_with(
            &exp.matrices,
            &EnsembleRuleConfig::weighted(weights.to_vec())?,
            exec,
        )?,
        CompareRule::Baseline(r) => {
            combine_scores_with(&exp.matrices, &EnsembleRuleConfig::new(r)?, exec)?
        }
        CompareRule::Fuzzy(kind) => fuse_dataset_with(&exp.matrices, densities, kind, exec)?,
    })
}

/// Default weighted-average weights for `n` classifiers.
pub fn default_weights(n: usize) -> Vec<f64> {
    if n == PRESET_WEIGHTS_3.len() {
        PRESET_WEIGHTS_3.to_vec()
    } else {
        vec![1.0; n]
    }
}

/// Accuracy of every requested rule on the same inputs.
pub fn run_compare(exp: &Experiment, opts: &CompareOptions) -> crate::Result<ComparisonReport> {
    let n = exp.matrices.len();
    let weights = opts.weights.clone().unwrap_or_else(|| default_weights(n));
    let raw = match &opts.densities {
        Some(d) => d.clone(),
        None => exp.densities_or_accuracy()?,
    };
    if raw.len() != n {
        return Err(ExperimentError::DensityCountMismatch {
            densities: raw.len(),
            classifiers: n,
        }
        .into());
    }
    let densities = FuzzyDensitySet::new(&raw, opts.policy)?;
    let rows = opts
        .rules
        .iter()
        .map(|&rule| {
            let preds = predict_rule(exp, rule, &weights, &densities, opts.exec)?;
            Ok(ComparisonRow {
                rule: rule.display_name().to_owned(),
                key: rule.key().to_owned(),
                accuracy: exp.accuracy_of(&preds.predicted())?,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let classifiers = exp
        .classifier_names()
        .into_iter()
        .zip(exp.classifier_accuracies()?)
        .map(|(classifier, accuracy)| ClassifierRow { classifier, accuracy })
        .collect();
    Ok(ComparisonReport {
        samples: exp.labels.len(),
        classifiers,
        weights,
        densities: densities.densities().to_vec(),
        lambda: densities.lambda(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub density_grid: Vec<f64>,
    pub integral: IntegralKind,
    pub max_combinations: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            density_grid: DEFAULT_GRID.to_vec(),
            integral: IntegralKind::default(),
            max_combinations: DEFAULT_MAX_COMBINATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Grid values as requested.
    pub densities: Vec<f64>,
    /// After clamping values of 1 into the open interval.
    pub effective_densities: Vec<f64>,
    pub lambda: f64,
    pub accuracy: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub integral: IntegralKind,
    pub classifiers: Vec<String>,
    pub grid: Vec<f64>,
    /// Sorted by accuracy, highest first; ties keep enumeration order.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.best)
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.classifiers.iter().map(String::len).max().unwrap_or(0).max(7);
        for name in &self.classifiers {
            write!(f, "{name:>w$}  ")?;
        }
        writeln!(f, "{:>11}", "Accuracy(%)")?;
        for r in &self.rows {
            for d in &r.densities {
                write!(f, "{d:>w$}  ")?;
            }
            write!(f, "{:>11.2}", r.accuracy)?;
            if r.best {
                write!(f, "  *")?;
            }
            writeln!(f)?;
        }
        write!(f, "integral: {}, {} combinations", self.integral, self.rows.len())
    }
}

/// Evaluates every density tuple from the grid's cartesian power.
pub fn run_sweep(
    exp: &Experiment,
    spec: &SweepSpec,
    policy: ClampPolicy,
    exec: Execution,
) -> crate::Result<SweepReport> {
    if spec.density_grid.is_empty() {
        return Err(ExperimentError::EmptyGrid.into());
    }
    // Validate and clamp the grid once; tuples are built from the result.
    let effective = validate_densities(&spec.density_grid, policy)?;
    let n = exp.matrices.len();
    let g = spec.density_grid.len();
    let combinations = (g as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if combinations > spec.max_combinations as u128 {
        return Err(ExperimentError::SweepTooLarge {
            combinations,
            cap: spec.max_combinations,
        }
        .into());
    }
    let tuple = |mut k: usize, grid: &[f64]| -> Vec<f64> {
        // Mixed-radix digits, first classifier most significant.
        let mut out = vec![0.0; n];
        for slot in out.iter_mut().rev() {
            *slot = grid[k % g];
            k /= g;
        }
        out
    };
    let mut rows = exec::try_map_indexed(combinations as usize, exec, |k| {
        let densities = tuple(k, &spec.density_grid);
        let set = FuzzyDensitySet::new(&tuple(k, &effective), ClampPolicy::Reject)?;
        let preds = fuse_dataset_with(&exp.matrices, &set, spec.integral, Execution::Sequential)?;
        Ok::<_, crate::Error>(SweepRow {
            effective_densities: set.densities().to_vec(),
            lambda: set.lambda(),
            accuracy: exp.accuracy_of(&preds.predicted())?,
            densities,
            best: false,
        })
    })?;
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    if let Some(first) = rows.first_mut() {
        first.best = true;
    }
    Ok(SweepReport {
        integral: spec.integral,
        classifiers: exp.classifier_names(),
        grid: spec.density_grid.clone(),
        rows,
    })
}
