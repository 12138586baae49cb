//! Fusion of classifier decision scores with Sugeno λ-fuzzy measures.
//!
//! The core pipeline is:
//!
//! 1. [`io`] loads one score matrix (samples × classes) per classifier;
//! 2. [`measures`] turns per-classifier densities into a λ-measure;
//! 3. [`integrals`] fuses each sample with the Sugeno or Choquet integral;
//! 4. [`metrics`], [`divergence`] and [`stats`] evaluate the result.
//!
//! [`baselines`] provides the classical combination rules to compare
//! against, [`synth`] a seeded stand-in for real classifier outputs, and
//! [`experiment`] the comparison and density-sweep drivers behind the CLI.

pub mod baselines;
pub mod divergence;
pub mod exec;
pub mod experiment;
pub mod integrals;
pub mod io;
pub mod measures;
pub mod metrics;
pub mod stats;
pub mod synth;

pub use exec::Execution;
pub use integrals::{fuse_dataset, fuse_sample, FusedSample, IntegralKind};
pub use io::{DecisionScoreMatrix, Predictions};
pub use measures::{ClampPolicy, FuzzyDensitySet, MeasureChain};

use thiserror::Error;

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Any error the library can return.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Measure(#[from] measures::MeasureError),
    #[error(transparent)]
    Fusion(#[from] integrals::FusionError),
    #[error(transparent)]
    Baseline(#[from] baselines::BaselineError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Divergence(#[from] divergence::DivergenceError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Synth(#[from] synth::InvalidConfig),
    #[error(transparent)]
    Experiment(#[from] experiment::ExperimentError),
}

impl Error {
    /// Variant name of the underlying module error, e.g. `RowSumViolation`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Measure(e) => e.name(),
            Error::Fusion(e) => e.name(),
            Error::Baseline(e) => e.name(),
            Error::Metrics(e) => e.name(),
            Error::Divergence(e) => e.name(),
            Error::Stats(e) => e.name(),
            Error::Io(e) => e.name(),
            Error::Synth(_) => "InvalidConfig",
            Error::Experiment(e) => e.name(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
