//! Sugeno λ-fuzzy measures over a set of classifiers.
//!
//! A measure is fixed by one density per classifier (the worth of that
//! classifier alone) plus the interaction parameter λ > −1, which is the
//! unique root of `∏(1 + λ·g_i) = 1 + λ` other than the trivial λ = 0.
//! The measure of a union of disjoint coalitions is then
//! `g(A ∪ B) = g(A) + g(B) + λ·g(A)·g(B)`, and the measure of the whole
//! classifier set is 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default margin used when a density of 1.0 (or more) is pulled back inside
/// the open unit interval.
pub const DEFAULT_CLAMP_EPS: f64 = 1e-6;

/// Bisection stops once the bracket is narrower than this.
pub const LAMBDA_TOL: f64 = 1e-12;

/// Hard cap on bisection steps.
pub const LAMBDA_MAX_ITER: usize = 200;

/// `|Σg − 1|` at or below this counts as an additive measure (λ = 0).
pub const ADDITIVE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("density set is empty")]
    EmptyDensitySet,
    #[error("density #{index} = {value} is outside (0, 1)")]
    DensityOutOfRange { index: usize, value: f64 },
    #[error("no root of the lambda equation in [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },
}

impl MeasureError {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureError::EmptyDensitySet => "EmptyDensitySet",
            MeasureError::DensityOutOfRange { .. } => "DensityOutOfRange",
            MeasureError::NoRootInBracket { .. } => "NoRootInBracket",
        }
    }
}

/// What to do with densities on or above the upper boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampPolicy {
    /// Anything outside the open interval (0, 1) is an error.
    Reject,
    /// Values `>= 1` become `1 − ε`; values `<= 0` are still rejected.
    Clamp(f64),
}

impl Default for ClampPolicy {
    fn default() -> Self {
        ClampPolicy::Clamp(DEFAULT_CLAMP_EPS)
    }
}

/// Checks (and under [`ClampPolicy::Clamp`] repairs) raw densities so every
/// value ends up strictly inside (0, 1).
pub fn validate_densities(raw: &[f64], policy: ClampPolicy) -> Result<Vec<f64>, MeasureError> {
    if raw.is_empty() {
        return Err(MeasureError::EmptyDensitySet);
    }
    raw.iter()
        .enumerate()
        .map(|(index, &value)| {
            let out_of_range = MeasureError::DensityOutOfRange { index, value };
            if !value.is_finite() || value <= 0.0 {
                return Err(out_of_range);
            }
            if value < 1.0 {
                return Ok(value);
            }
            match policy {
                ClampPolicy::Reject => Err(out_of_range),
                ClampPolicy::Clamp(eps) => {
                    let clamped = 1.0 - eps;
                    log::warn!("density #{index} = {value} clamped to {clamped}");
                    Ok(clamped)
                }
            }
        })
        .collect()
}

/// `(∏(1 + λ·g_i) − 1) / λ − 1`, evaluated without forming the product
/// first.
///
/// This is the λ-equation residual divided by λ. It shares every nonzero root
/// with the residual, but equals `Σg − 1` at λ = 0 instead of vanishing there,
/// so its sign is reliable right next to the origin.
fn deflated_residual(densities: &[f64], lambda: f64) -> f64 {
    // q_k = (∏_{i<=k}(1 + λ g_i) − 1) / λ
    let q = densities
        .iter()
        .fold(0.0, |q, &g| q * (1.0 + lambda * g) + g);
    q - 1.0
}

/// Residual of the λ-equation, `∏(1 + λ·g_i) − (1 + λ)`.
pub fn lambda_residual(densities: &[f64], lambda: f64) -> f64 {
    densities.iter().map(|&g| 1.0 + lambda * g).product::<f64>() - (1.0 + lambda)
}

/// Solves for the interaction parameter λ of a validated density set.
///
/// A single density, or densities summing to 1, give λ = 0. Otherwise the
/// nonzero root is found by bisection: on `(0, upper)` with a doubling upper
/// bound when `Σg < 1`, on `(−1, 0)` when `Σg > 1`. The result does not depend
/// on the order of `densities`.
pub fn solve_lambda(densities: &[f64]) -> Result<f64, MeasureError> {
    if densities.is_empty() {
        return Err(MeasureError::EmptyDensitySet);
    }
    if densities.len() == 1 {
        return Ok(0.0);
    }
    // Fixed evaluation order so permuted inputs give bit-identical λ.
    let mut g = densities.to_vec();
    g.sort_by(f64::total_cmp);

    let total: f64 = g.iter().sum();
    if (total - 1.0).abs() <= ADDITIVE_TOL {
        return Ok(0.0);
    }

    let h = |lambda: f64| deflated_residual(&g, lambda);
    // h(lo) < 0 < h(hi) on both branches.
    let (mut lo, mut hi) = if total < 1.0 {
        let mut upper = 1.0_f64;
        while h(upper) <= 0.0 {
            upper *= 2.0;
            if !upper.is_finite() {
                return Err(MeasureError::NoRootInBracket { lo: 0.0, hi: upper });
            }
        }
        (0.0, upper)
    } else {
        // h(−1) = −∏(1 − g_i) < 0 for densities below 1, but the product
        // underflows the fold's precision when several densities sit at the
        // clamp boundary. The root is then indistinguishable from −1.
        if h(-1.0) >= 0.0 {
            return Ok(-1.0 + f64::EPSILON);
        }
        (-1.0, 0.0)
    };
    if !(h(lo) < 0.0 && h(hi) > 0.0) {
        return Err(MeasureError::NoRootInBracket { lo, hi });
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..LAMBDA_MAX_ITER {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= LAMBDA_TOL * mid.abs().max(1.0) {
            mid = 0.5 * (lo + hi);
            break;
        }
    }
    Ok(mid)
}

/// Validated densities together with their solved λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyDensitySet {
    densities: Vec<f64>,
    lambda: f64,
}

impl FuzzyDensitySet {
    /// Validates `raw` under `policy` and solves for λ.
    pub fn new(raw: &[f64], policy: ClampPolicy) -> Result<Self, MeasureError> {
        let densities = validate_densities(raw, policy)?;
        let lambda = solve_lambda(&densities)?;
        Ok(FuzzyDensitySet { densities, lambda })
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    /// A one-classifier set has no interaction to solve; its full-set
    /// measure is taken to be 1 so fusion passes scores through unchanged.
    pub fn is_trivially_normalized(&self) -> bool {
        self.densities.len() == 1
    }

    /// The same measure with classifiers reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        FuzzyDensitySet {
            densities: order.iter().map(|&i| self.densities[i]).collect(),
            lambda: self.lambda,
        }
    }
}

/// Cumulative measures `g(X_1) ≤ … ≤ g(X_N)` of the nested coalitions
/// obtained by adding classifiers one at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureChain {
    pub values: Vec<f64>,
}

impl MeasureChain {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Measure of the full coalition, or 0 for an empty chain.
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Builds the chain `g(X_k) = g(X_{k−1}) + d_k + λ·d_k·g(X_{k−1})`.
///
/// `sorted_densities` must already be permuted into coalition order; `lambda`
/// is the value solved for the unpermuted set.
pub fn cumulative_measure(sorted_densities: &[f64], lambda: f64) -> MeasureChain {
    let mut values = Vec::with_capacity(sorted_densities.len());
    let mut prev = 0.0;
    for (k, &d) in sorted_densities.iter().enumerate() {
        let next = if k == 0 { d } else { prev + d + lambda * d * prev };
        values.push(next);
        prev = next;
    }
    MeasureChain { values }
}
