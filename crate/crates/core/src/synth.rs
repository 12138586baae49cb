//! Deterministic synthetic decision scores.
//!
//! Each sample gets a uniform true label and classifier i is correct with
//! probability `accuracies[i]`, independently of the others. With
//! probability `correlation` the sample is *shared*: every wrong classifier
//! points at the same wrong class. Otherwise each picks its own wrong class
//! uniformly.
//!
//! A score vector is a Dirichlet draw with parameter `1 + concentration` on
//! the intended top class (`1 + error_concentration` when that class is
//! wrong) and 1 elsewhere. If the draw's maximum lands elsewhere it is
//! swapped onto the intended class, so the argmax always matches.
//!
//! Randomness comes from ChaCha20 keyed by `seed_from_u64(seed)`, one
//! stream per sample index. Samples are therefore independent of each other
//! and of how generation is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::io::{default_class_names, DecisionScoreMatrix, Labels};

/// Identifier of the random stream layout, recorded next to generated files.
pub const PRNG_ALGORITHM: &str = "chacha20/seed_from_u64/stream=sample_index";

pub const DEFAULT_CONCENTRATION: f64 = 10.0;
pub const DEFAULT_ERROR_CONCENTRATION: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid synthetic config: {0}")]
pub struct InvalidConfig(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub samples: usize,
    pub classes: usize,
    pub classifiers: usize,
    pub accuracies: Vec<f64>,
    pub correlation: f64,
    pub concentration: f64,
    /// Peak parameter used when a classifier is wrong; lower means wrong
    /// predictions are less confident.
    #[serde(default = "default_error_concentration")]
    pub error_concentration: f64,
    pub seed: u64,
}

fn default_error_concentration() -> f64 {
    DEFAULT_ERROR_CONCENTRATION
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let fail = |m: String| Err(InvalidConfig(m));
        if self.samples == 0 {
            return fail("samples must be positive".into());
        }
        if self.classes < 2 {
            return fail("need at least two classes".into());
        }
        if self.classifiers == 0 {
            return fail("need at least one classifier".into());
        }
        if self.accuracies.len() != self.classifiers {
            return fail(format!(
                "{} accuracies for {} classifiers",
                self.accuracies.len(),
                self.classifiers
            ));
        }
        let chance = 1.0 / self.classes as f64;
        if let Some(a) = self.accuracies.iter().find(|a| !(**a > chance && **a < 1.0)) {
            return fail(format!("accuracy {a} outside ({chance}, 1)"));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return fail(format!("correlation {} outside [0, 1]", self.correlation));
        }
        for (name, v) in [("concentration", self.concentration), ("error concentration", self.error_concentration)] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} {v} must be positive"));
            }
        }
        Ok(())
    }
}

/// Labels plus one score matrix per classifier, sharing sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub labels: Labels,
    pub matrices: Vec<DecisionScoreMatrix>,
}

struct Gammas {
    correct: Gamma<f64>,
    wrong: Gamma<f64>,
    flat: Gamma<f64>,
}

struct SampleDraw {
    label: usize,
    rows: Vec<Vec<f64>>,
}

fn wrong_class(rng: &mut ChaCha20Rng, classes: usize, label: usize) -> usize {
    let k = rng.random_range(0..classes - 1);
    if k >= label {
        k + 1
    } else {
        k
    }
}

fn score_vector(
    rng: &mut ChaCha20Rng,
    classes: usize,
    top: usize,
    peak: &Gamma<f64>,
    flat: &Gamma<f64>,
) -> Vec<f64> {
    let mut v: Vec<f64> = (0..classes)
        .map(|c| if c == top { peak.sample(rng) } else { flat.sample(rng) })
        .collect();
    let argmax = crate::argmax(&v);
    if argmax != top {
        v.swap(argmax, top);
    }
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[top] = 1.0;
    }
    v
}

fn draw_sample(cfg: &SynthConfig, index: usize, gammas: &Gammas) -> SampleDraw {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let p = cfg.classes;
    let label = rng.random_range(0..p);
    let shared = rng.random_bool(cfg.correlation);
    let common_wrong = wrong_class(&mut rng, p, label);
    let rows = cfg
        .accuracies
        .iter()
        .map(|&acc| {
            let correct = rng.random_bool(acc);
            let wrong = if shared {
                common_wrong
            } else {
                wrong_class(&mut rng, p, label)
            };
            let (top, peak) = if correct {
                (label, &gammas.correct)
            } else {
                (wrong, &gammas.wrong)
            };
            score_vector(&mut rng, p, top, peak, &gammas.flat)
        })
        .collect();
    SampleDraw { label, rows }
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, InvalidConfig> {
    generate_with(config, Execution::default())
}

pub fn generate_with(config: &SynthConfig, exec: Execution) -> Result<SynthOutput, InvalidConfig> {
    config.validate()?;
    let gamma = |shape: f64| Gamma::new(shape, 1.0).map_err(|e| InvalidConfig(e.to_string()));
    let gammas = Gammas {
        correct: gamma(1.0 + config.concentration)?,
        wrong: gamma(1.0 + config.error_concentration)?,
        flat: gamma(1.0)?,
    };
    let draws = exec::map_indexed(config.samples, exec, |i| draw_sample(config, i, &gammas));

    let width = config.samples.to_string().len().max(5);
    let sample_ids: Vec<String> = (0..config.samples).map(|i| format!("s{i:0width$}")).collect();
    let labels: Vec<usize> = draws.iter().map(|d| d.label).collect();
    let class_names = default_class_names(config.classes);
    let matrices = (0..config.classifiers)
        .map(|k| DecisionScoreMatrix {
            classifier_name: format!("model_{k}"),
            sample_ids: sample_ids.clone(),
            labels: labels.iter().map(|&l| Some(l)).collect(),
            scores: draws.iter().map(|d| d.rows[k].clone()).collect(),
            class_names: class_names.clone(),
        })
        .collect();
    Ok(SynthOutput {
        labels: Labels { sample_ids, labels },
        matrices,
    })
}
