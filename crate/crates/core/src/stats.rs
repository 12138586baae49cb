//! McNemar's paired test on two classifiers' per-sample correctness.
//!
//! Only the discordant counts matter: `b` samples where the first
//! classifier is right and the second wrong, `c` the reverse. Small tables
//! (`b + c < 25`) use the exact two-sided binomial test; larger ones use the
//! continuity-corrected chi-square statistic with one degree of freedom.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discordant totals below this use the exact binomial test.
pub const EXACT_THRESHOLD: u64 = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {a} / {b} predictions vs {labels} labels")]
    LengthMismatch { a: usize, b: usize, labels: usize },
    #[error("no samples")]
    Empty,
}

impl StatsError {
    pub fn name(&self) -> &'static str {
        match self {
            StatsError::LengthMismatch { .. } => "LengthMismatch",
            StatsError::Empty => "Empty",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquareCorrected,
}

impl McNemarMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            McNemarMethod::ExactBinomial => "exact-binomial",
            McNemarMethod::ChiSquareCorrected => "chi-square-corrected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// First correct, second wrong.
    pub b: u64,
    /// First wrong, second correct.
    pub c: u64,
    /// `min(b, c)` for the exact test, the corrected χ² value otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
    /// Set when `b = c = 0`; the p-value is then 1 by definition.
    pub all_agree: bool,
}

/// Runs the test on two prediction lists against shared labels.
pub fn mcnemar(preds_a: &[usize], preds_b: &[usize], labels: &[usize]) -> Result<McNemarResult, StatsError> {
    if preds_a.len() != labels.len() || preds_b.len() != labels.len() {
        return Err(StatsError::LengthMismatch {
            a: preds_a.len(),
            b: preds_b.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(StatsError::Empty);
    }
    let (mut b, mut c) = (0u64, 0u64);
    for ((&pa, &pb), &t) in preds_a.iter().zip(preds_b).zip(labels) {
        match (pa == t, pb == t) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_from_counts(b, c))
}

/// Test result straight from discordant counts.
pub fn mcnemar_from_counts(b: u64, c: u64) -> McNemarResult {
    let n = b + c;
    if n == 0 {
        return McNemarResult {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            method: McNemarMethod::ExactBinomial,
            all_agree: true,
        };
    }
    if n < EXACT_THRESHOLD {
        McNemarResult {
            b,
            c,
            statistic: b.min(c) as f64,
            p_value: exact_binomial_p(b, c),
            method: McNemarMethod::ExactBinomial,
            all_agree: false,
        }
    } else {
        let statistic = corrected_chi_square(b, c);
        McNemarResult {
            b,
            c,
            statistic,
            p_value: chi_square_1df_sf(statistic),
            method: McNemarMethod::ChiSquareCorrected,
            all_agree: false,
        }
    }
}

/// `(|b − c| − 1)² / (b + c)`, with the corrected difference floored at 0.
pub fn corrected_chi_square(b: u64, c: u64) -> f64 {
    let n = (b + c) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let d = (b.abs_diff(c) as f64 - 1.0).max(0.0);
    d * d / n
}

/// Two-sided exact binomial p-value
/// `min(1, 2·Σ_{k ≥ max(b,c)} C(n, k)·0.5ⁿ)`, `n = b + c`.
pub fn exact_binomial_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k0 = b.max(c);
    // ln k! for k = 0..=n
    let mut ln_fact = Vec::with_capacity(n as usize + 1);
    ln_fact.push(0.0);
    for k in 1..=n {
        let prev: f64 = ln_fact[k as usize - 1];
        ln_fact.push(prev + (k as f64).ln());
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let tail: f64 = (k0..=n)
        .map(|k| {
            (ln_fact[n as usize] - ln_fact[k as usize] - ln_fact[(n - k) as usize] + ln_half_n)
                .exp()
        })
        .sum();
    (2.0 * tail).min(1.0)
}

/// Upper tail `P(X > x)` of χ² with one degree of freedom, `erfc(√(x/2))`.
pub fn chi_square_1df_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    erfc((0.5 * x).sqrt())
}

/// Complementary error function for `x ≥ 0`.
///
/// Below 2.5 it sums the positive-term series
/// `erf(x) = 2/√π · e^{−x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!`; above, it evaluates
/// the Laplace continued fraction with the modified Lentz method.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * (-x2).exp() * sum
    } else {
        // erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..500 {
            let a = k as f64 * 0.5;
            d = x + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = x + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / (PI.sqrt() * f)
    }
}
