//! Kullback–Leibler and Jensen–Shannon divergences between classifiers'
//! score distributions. Natural logarithms throughout.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::io::{check_alignment, DecisionScoreMatrix, IoError};

/// Additive smoothing applied before renormalizing each distribution.
pub const DEFAULT_SMOOTHING: f64 = 1e-12;

/// Accepted deviation of an input distribution's sum from 1.
pub const DISTRIBUTION_TOL: f64 = crate::io::ROW_SUM_TOL;

#[derive(Debug, Error)]
pub enum DivergenceError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error(transparent)]
    Alignment(#[from] IoError),
}

impl DivergenceError {
    pub fn name(&self) -> &'static str {
        match self {
            DivergenceError::LengthMismatch(..) => "LengthMismatch",
            DivergenceError::NotADistribution(_) => "NotADistribution",
            DivergenceError::Alignment(e) => e.name(),
        }
    }
}

fn check_distribution(p: &[f64]) -> Result<(), DivergenceError> {
    if p.is_empty() {
        return Err(DivergenceError::NotADistribution("empty vector".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(DivergenceError::NotADistribution(format!("entry {v}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(DivergenceError::NotADistribution(format!("sums to {sum}")));
    }
    Ok(())
}

fn smooth(p: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = p.iter().map(|v| v + eps).sum();
    p.iter().map(|v| (v + eps) / total).collect()
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<(), DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::LengthMismatch(p.len(), q.len()));
    }
    check_distribution(p)?;
    check_distribution(q)
}

/// `Σ p·ln(p/q)` over strictly positive vectors.
fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

/// `D_KL(p ‖ q)` after ε-smoothing both inputs.
pub fn kld(p: &[f64], q: &[f64], smoothing: f64) -> Result<f64, DivergenceError> {
    check_pair(p, q)?;
    Ok(kl_raw(&smooth(p, smoothing), &smooth(q, smoothing)))
}

/// `(D_KL(p ‖ m) + D_KL(q ‖ m)) / 2` with `m = (p + q) / 2`, using the
/// default smoothing.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
    jsd_with(p, q, DEFAULT_SMOOTHING)
}

pub fn jsd_with(p: &[f64], q: &[f64], smoothing: f64) -> Result<f64, DivergenceError> {
    check_pair(p, q)?;
    let p = smooth(p, smoothing);
    let q = smooth(q, smoothing);
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    let v = 0.5 * (kl_raw(&p, &m) + kl_raw(&q, &m));
    Ok(v.clamp(0.0, std::f64::consts::LN_2))
}

/// How per-sample rows are reduced to one number per model pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Mean of per-sample row divergences.
    #[default]
    MeanSample,
    /// Divergence between the models' mean score vectors.
    MeanDistribution,
}

impl FromStr for Reduction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" | "mean-sample" => Ok(Reduction::MeanSample),
            "mean-distribution" => Ok(Reduction::MeanDistribution),
            other => Err(format!("unknown reduction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KldEntry {
    pub p: String,
    pub q: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsdEntry {
    pub a: String,
    pub b: String,
    pub value: f64,
}

/// Both KLD directions for every model pair, and one JSD per unordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceTable {
    pub reduction: Reduction,
    pub smoothing: f64,
    pub models: Vec<String>,
    pub kld: Vec<KldEntry>,
    pub jsd: Vec<JsdEntry>,
}

impl DivergenceTable {
    pub fn kld_between(&self, p: &str, q: &str) -> Option<f64> {
        self.kld.iter().find(|e| e.p == p && e.q == q).map(|e| e.value)
    }

    pub fn jsd_between(&self, a: &str, b: &str) -> Option<f64> {
        self.jsd
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map(|e| e.value)
    }

    /// Aligned text table: for each pair, both KLD directions sharing one
    /// JSD cell.
    pub fn to_text(&self) -> String {
        let w = self.models.iter().map(String::len).max().unwrap_or(0).max(14);
        let mut out = format!(
            "{:<w$}  {:<w$}  {:>9}  {:>9}\n",
            "Distribution P", "Distribution Q", "KLD(P||Q)", "JSD"
        );
        for j in &self.jsd {
            let fwd = self.kld_between(&j.a, &j.b).unwrap_or(f64::NAN);
            let bwd = self.kld_between(&j.b, &j.a).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{:<w$}  {:<w$}  {:>9.3}  {:>9.3}\n",
                j.a, j.b, fwd, j.value
            ));
            out.push_str(&format!("{:<w$}  {:<w$}  {:>9.3}\n", j.b, j.a, bwd));
        }
        out
    }
}

fn mean_row(m: &DecisionScoreMatrix) -> Vec<f64> {
    let n = m.num_samples() as f64;
    let mut acc = vec![0.0; m.num_classes()];
    for row in &m.scores {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let mut mean: Vec<f64> = acc.into_iter().map(|a| a / n).collect();
    // Re-close the sum so the distribution check is not tripped by rounding.
    let s: f64 = mean.iter().sum();
    mean.iter_mut().for_each(|v| *v /= s);
    mean
}

fn reduce_pair<F>(
    a: &DecisionScoreMatrix,
    b: &DecisionScoreMatrix,
    reduction: Reduction,
    f: F,
) -> Result<f64, DivergenceError>
where
    F: Fn(&[f64], &[f64]) -> Result<f64, DivergenceError>,
{
    match reduction {
        Reduction::MeanSample => {
            let mut total = 0.0;
            for (p, q) in a.scores.iter().zip(&b.scores) {
                total += f(p, q)?;
            }
            Ok(total / a.num_samples().max(1) as f64)
        }
        Reduction::MeanDistribution => f(&mean_row(a), &mean_row(b)),
    }
}

pub fn pairwise_divergences(
    matrices: &[DecisionScoreMatrix],
    reduction: Reduction,
    smoothing: f64,
) -> Result<DivergenceTable, DivergenceError> {
    pairwise_divergences_with(matrices, reduction, smoothing, Execution::default())
}

pub fn pairwise_divergences_with(
    matrices: &[DecisionScoreMatrix],
    reduction: Reduction,
    smoothing: f64,
    exec: Execution,
) -> Result<DivergenceTable, DivergenceError> {
    check_alignment(matrices)?;
    let n = matrices.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    // (forward KLD, backward KLD, JSD) per unordered pair
    let values = exec::try_map_indexed(pairs.len(), exec, |k| {
        let (i, j) = pairs[k];
        let (a, b) = (&matrices[i], &matrices[j]);
        Ok::<_, DivergenceError>((
            reduce_pair(a, b, reduction, |p, q| kld(p, q, smoothing))?,
            reduce_pair(b, a, reduction, |p, q| kld(p, q, smoothing))?,
            reduce_pair(a, b, reduction, |p, q| jsd_with(p, q, smoothing))?,
        ))
    })?;

    let name = |i: usize| matrices[i].classifier_name.clone();
    let mut table = DivergenceTable {
        reduction,
        smoothing,
        models: (0..n).map(name).collect(),
        kld: Vec::with_capacity(2 * pairs.len()),
        jsd: Vec::with_capacity(pairs.len()),
    };
    for (&(i, j), &(fwd, bwd, js)) in pairs.iter().zip(&values) {
        table.kld.push(KldEntry {
            p: name(i),
            q: name(j),
            value: fwd,
        });
        table.kld.push(KldEntry {
            p: name(j),
            q: name(i),
            value: bwd,
        });
        table.jsd.push(JsdEntry {
            a: name(i),
            b: name(j),
            value: js,
        });
    }
    Ok(table)
}
