//! Score, label and prediction files, plus the experiment manifest.
//!
//! Score files are UTF-8 CSV with header `sample_id,label,<class>...`
//! (conventionally `p_0 … p_{P−1}`); one row per sample holding that
//! classifier's probability vector. Prediction files use
//! `sample_id,predicted,fused_p_0,…` with six fixed decimals.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrals::{FusedSample, IntegralKind};

/// Row sums may deviate from 1 by this much before renormalization.
pub const ROW_SUM_TOL: f64 = 1e-4;

/// Environment variable that overrides the manifest seed.
pub const SEED_ENV: &str = "FUZZFUSE_SEED";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: line {line}: {message}")]
    ParseError {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: line {line}: row sums to {sum} (tolerance {ROW_SUM_TOL})")]
    RowSumViolation { path: String, line: usize, sum: f64 },
    #[error("{path}: duplicate sample id {id:?}")]
    DuplicateSampleId { path: String, id: String },
    #[error("sample alignment: {0}")]
    SampleAlignmentError(String),
    #[error("manifest: {0}")]
    ManifestError(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub fn name(&self) -> &'static str {
        match self {
            IoError::ParseError { .. } => "ParseError",
            IoError::RowSumViolation { .. } => "RowSumViolation",
            IoError::DuplicateSampleId { .. } => "DuplicateSampleId",
            IoError::SampleAlignmentError(_) => "SampleAlignmentError",
            IoError::ManifestError(_) => "ManifestError",
            IoError::Io { .. } => "IoError",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::ParseError {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

/// One classifier's probability scores, samples × classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionScoreMatrix {
    pub classifier_name: String,
    pub sample_ids: Vec<String>,
    /// True class per sample when the file carries one.
    pub labels: Vec<Option<usize>>,
    pub scores: Vec<Vec<f64>>,
    pub class_names: Vec<String>,
}

impl DecisionScoreMatrix {
    pub fn num_samples(&self) -> usize {
        self.scores.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Top-scoring class per sample, lowest index on ties.
    pub fn argmax_predictions(&self) -> Vec<usize> {
        self.scores.iter().map(|row| crate::argmax(row)).collect()
    }

    /// Labels, if every row has one.
    pub fn complete_labels(&self) -> Option<Vec<usize>> {
        self.labels.iter().copied().collect()
    }
}

/// Default class header names `p_0 … p_{P−1}`.
pub fn default_class_names(classes: usize) -> Vec<String> {
    (0..classes).map(|c| format!("p_{c}")).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Rescale rows whose sum misses 1 by more than [`ROW_SUM_TOL`].
    pub renormalize: bool,
}

fn reader(path: &Path) -> Result<csv::Reader<File>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn headers(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>, IoError> {
    Ok(rdr
        .headers()
        .map_err(|e| IoError::parse(path, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect())
}

fn parse_label(
    path: &Path,
    line: usize,
    field: &str,
    class_names: &[String],
) -> Result<Option<usize>, IoError> {
    if field.is_empty() {
        return Ok(None);
    }
    let idx = match field.parse::<usize>() {
        Ok(i) => i,
        Err(_) => class_names
            .iter()
            .position(|n| n == field)
            .ok_or_else(|| IoError::parse(path, line, format!("unknown label {field:?}")))?,
    };
    if idx >= class_names.len() {
        return Err(IoError::parse(
            path,
            line,
            format!("label {idx} out of range for {} classes", class_names.len()),
        ));
    }
    Ok(Some(idx))
}

fn classifier_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Loads one classifier's score file.
pub fn load_scores(path: impl AsRef<Path>, opts: LoadOptions) -> Result<DecisionScoreMatrix, IoError> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header.len() < 3 || header[0] != "sample_id" || header[1] != "label" {
        return Err(IoError::parse(
            path,
            1,
            "expected header sample_id,label,<class columns>",
        ));
    }
    let class_names: Vec<String> = header[2..].to_vec();
    let classes = class_names.len();

    let mut seen = HashSet::new();
    let mut m = DecisionScoreMatrix {
        classifier_name: classifier_name(path),
        sample_ids: Vec::new(),
        labels: Vec::new(),
        scores: Vec::new(),
        class_names,
    };
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| IoError::parse(path, line, e.to_string()))?;
        if record.len() != classes + 2 {
            return Err(IoError::parse(
                path,
                line,
                format!("expected {} fields, found {}", classes + 2, record.len()),
            ));
        }
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(IoError::parse(path, line, "empty sample id"));
        }
        if !seen.insert(id.clone()) {
            return Err(IoError::DuplicateSampleId {
                path: path.display().to_string(),
                id,
            });
        }
        let label = parse_label(path, line, &record[1], &m.class_names)?;
        let mut row = record
            .iter()
            .skip(2)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| IoError::parse(path, line, format!("bad score {f:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            if !opts.renormalize || sum <= 0.0 {
                return Err(IoError::RowSumViolation {
                    path: path.display().to_string(),
                    line,
                    sum,
                });
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        m.sample_ids.push(id);
        m.labels.push(label);
        m.scores.push(row);
    }
    Ok(m)
}

/// Writes a score matrix in the format [`load_scores`] reads.
pub fn write_scores(m: &DecisionScoreMatrix, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut line = String::from("sample_id,label");
    for name in &m.class_names {
        line.push(',');
        line.push_str(name);
    }
    writeln!(w, "{line}").map_err(|e| IoError::io(path, e))?;
    for ((id, label), row) in m.sample_ids.iter().zip(&m.labels).zip(&m.scores) {
        line.clear();
        line.push_str(id);
        line.push(',');
        if let Some(l) = label {
            line.push_str(&l.to_string());
        }
        push_fixed(&mut line, row);
        writeln!(w, "{line}").map_err(|e| IoError::io(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| IoError::io(path, e))
}

fn push_fixed(line: &mut String, values: &[f64]) {
    for v in values {
        line.push(',');
        line.push_str(&format_fixed(*v));
    }
}

/// Six-decimal fixed notation used by every emitted CSV.
pub fn format_fixed(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}

/// Rejects matrices that disagree on sample ids (by position) or class count.
pub fn check_alignment(matrices: &[DecisionScoreMatrix]) -> Result<(), IoError> {
    let Some(first) = matrices.first() else {
        return Err(IoError::SampleAlignmentError("no score matrices".into()));
    };
    for m in &matrices[1..] {
        if m.num_classes() != first.num_classes() {
            return Err(IoError::SampleAlignmentError(format!(
                "{} has {} classes, {} has {}",
                first.classifier_name,
                first.num_classes(),
                m.classifier_name,
                m.num_classes()
            )));
        }
        if m.num_samples() != first.num_samples() {
            return Err(IoError::SampleAlignmentError(format!(
                "{} has {} samples, {} has {}",
                first.classifier_name,
                first.num_samples(),
                m.classifier_name,
                m.num_samples()
            )));
        }
        if let Some(pos) = m
            .sample_ids
            .iter()
            .zip(&first.sample_ids)
            .position(|(a, b)| a != b)
        {
            return Err(IoError::SampleAlignmentError(format!(
                "row {}: {} has id {:?}, {} has {:?}",
                pos + 1,
                first.classifier_name,
                first.sample_ids[pos],
                m.classifier_name,
                m.sample_ids[pos]
            )));
        }
    }
    Ok(())
}

/// Ground-truth labels keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub sample_ids: Vec<String>,
    pub labels: Vec<usize>,
}

impl Labels {
    /// Labels reordered to follow `ids`; every id must be present.
    pub fn aligned_to(&self, ids: &[String]) -> Result<Vec<usize>, IoError> {
        if self.sample_ids.as_slice() == ids {
            return Ok(self.labels.clone());
        }
        let index: std::collections::HashMap<&str, usize> = self
            .sample_ids
            .iter()
            .map(String::as_str)
            .zip(self.labels.iter().copied())
            .collect();
        ids.iter()
            .map(|id| {
                index.get(id.as_str()).copied().ok_or_else(|| {
                    IoError::SampleAlignmentError(format!("no label for sample {id:?}"))
                })
            })
            .collect()
    }
}

/// Loads a `sample_id,label` file; labels are class indices.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Labels, IoError> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header.len() < 2 || header[0] != "sample_id" || header[1] != "label" {
        return Err(IoError::parse(path, 1, "expected header sample_id,label"));
    }
    let mut seen = HashSet::new();
    let mut out = Labels {
        sample_ids: Vec::new(),
        labels: Vec::new(),
    };
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| IoError::parse(path, line, e.to_string()))?;
        let id = record[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(IoError::DuplicateSampleId {
                path: path.display().to_string(),
                id,
            });
        }
        let label = record[1]
            .parse::<usize>()
            .map_err(|_| IoError::parse(path, line, format!("bad label {:?}", &record[1])))?;
        out.sample_ids.push(id);
        out.labels.push(label);
    }
    Ok(out)
}

pub fn write_labels(labels: &Labels, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    writeln!(w, "sample_id,label").map_err(|e| IoError::io(path, e))?;
    for (id, l) in labels.sample_ids.iter().zip(&labels.labels) {
        writeln!(w, "{id},{l}").map_err(|e| IoError::io(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

/// Fused (or rule-combined) output for a whole dataset, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub sample_ids: Vec<String>,
    pub samples: Vec<FusedSample>,
}

impl Predictions {
    pub fn predicted(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.predicted_class).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.samples.first().map_or(0, |s| s.fused_scores.len())
    }
}

/// Writes `sample_id,predicted,fused_p_0,…` rows with six decimals.
pub fn write_predictions(preds: &Predictions, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    if preds.samples.is_empty() {
        return Err(IoError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "no predictions to write"),
        ));
    }
    let mut w = create(path)?;
    let mut line = String::from("sample_id,predicted");
    for c in 0..preds.num_classes() {
        line.push_str(&format!(",fused_p_{c}"));
    }
    writeln!(w, "{line}").map_err(|e| IoError::io(path, e))?;
    for (id, s) in preds.sample_ids.iter().zip(&preds.samples) {
        line.clear();
        line.push_str(id);
        line.push(',');
        line.push_str(&s.predicted_class.to_string());
        push_fixed(&mut line, &s.fused_scores);
        writeln!(w, "{line}").map_err(|e| IoError::io(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Predictions, IoError> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    if header.len() < 2 || header[0] != "sample_id" || header[1] != "predicted" {
        return Err(IoError::parse(path, 1, "expected header sample_id,predicted,..."));
    }
    let classes = header.len() - 2;
    let mut seen = HashSet::new();
    let mut out = Predictions {
        sample_ids: Vec::new(),
        samples: Vec::new(),
    };
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| IoError::parse(path, line, e.to_string()))?;
        let id = record[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(IoError::DuplicateSampleId {
                path: path.display().to_string(),
                id,
            });
        }
        let predicted_class = record[1]
            .parse::<usize>()
            .map_err(|_| IoError::parse(path, line, format!("bad class {:?}", &record[1])))?;
        let fused_scores = record
            .iter()
            .skip(2)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| IoError::parse(path, line, format!("bad score {f:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if fused_scores.len() != classes || (classes > 0 && predicted_class >= classes) {
            return Err(IoError::parse(path, line, "row does not match header"));
        }
        out.sample_ids.push(id);
        out.samples.push(FusedSample {
            fused_scores,
            predicted_class,
        });
    }
    Ok(out)
}

/// Per-sample predicted classes from either a prediction file or a score
/// file (argmax), detected by header.
pub fn load_predicted_classes(
    path: impl AsRef<Path>,
) -> Result<(Vec<String>, Vec<usize>), IoError> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    drop(rdr);
    if header.get(1).map(String::as_str) == Some("predicted") {
        let p = load_predictions(path)?;
        let predicted = p.predicted();
        Ok((p.sample_ids, predicted))
    } else {
        let m = load_scores(path, LoadOptions { renormalize: true })?;
        let predicted = m.argmax_predictions();
        Ok((m.sample_ids, predicted))
    }
}

/// Flat JSON description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub score_files: Vec<PathBuf>,
    #[serde(default)]
    pub densities: Option<Vec<f64>>,
    pub labels_file: PathBuf,
    #[serde(default)]
    pub integral: IntegralKind,
    #[serde(default)]
    pub rules: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ExperimentManifest {
    /// Reads a manifest; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        let mut m: ExperimentManifest = serde_json::from_str(&text)
            .map_err(|e| IoError::parse(path, e.line(), e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &PathBuf| if p.is_relative() { base.join(p) } else { p.clone() };
        m.score_files = m.score_files.iter().map(resolve).collect();
        m.labels_file = resolve(&m.labels_file);
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if self.score_files.is_empty() {
            return Err(IoError::ManifestError("score_files is empty".into()));
        }
        if let Some(d) = &self.densities {
            if d.len() != self.score_files.len() {
                return Err(IoError::ManifestError(format!(
                    "{} densities for {} score files",
                    d.len(),
                    self.score_files.len()
                )));
            }
        }
        for p in self.score_files.iter().chain(std::iter::once(&self.labels_file)) {
            if !p.exists() {
                return Err(IoError::ManifestError(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Seed after applying the `FUZZFUSE_SEED` override.
    pub fn effective_seed(&self) -> Option<u64> {
        seed_override().or(self.seed)
    }
}

/// Parsed value of `FUZZFUSE_SEED`, if set and numeric.
pub fn seed_override() -> Option<u64> {
    std::env::var(SEED_ENV).ok()?.trim().parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "sample_id,label,p_0,p_1\na,0,0.7,0.3\nb,,0.2,0.8\n",
        );
        let m = load_scores(&p, LoadOptions::default()).unwrap();
        assert_eq!(m.num_samples(), 2);
        assert_eq!(m.sample_ids, vec!["a", "b"]);
        assert_eq!(m.labels, vec![Some(0), None]);
        assert_eq!(m.classifier_name, "m");
        assert_eq!(m.argmax_predictions(), vec![0, 1]);
    }

    #[test]
    fn row_sum_violation_without_renormalize() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "sample_id,label,p_0,p_1\na,0,0.6,0.6\n");
        let err = load_scores(&p, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, IoError::RowSumViolation { line: 2, .. }), "{err}");
    }

    #[test]
    fn renormalize_divides_by_row_sum() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "sample_id,label,p_0,p_1\na,0,0.6,0.6\n");
        let m = load_scores(&p, LoadOptions { renormalize: true }).unwrap();
        assert_eq!(m.scores[0], vec![0.5, 0.5]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "sample_id,label,p_0,p_1\na,0,0.5,0.5\na,1,0.5,0.5\n",
        );
        assert!(matches!(
            load_scores(&p, LoadOptions::default()),
            Err(IoError::DuplicateSampleId { .. })
        ));
    }

    #[test]
    fn negative_scores_and_bad_header_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "sample_id,label,p_0,p_1\na,0,-0.5,1.5\n");
        assert!(matches!(
            load_scores(&p, LoadOptions::default()),
            Err(IoError::ParseError { line: 2, .. })
        ));
        let p = write(dir.path(), "n.csv", "id,p_0\na,1.0\n");
        assert!(matches!(
            load_scores(&p, LoadOptions::default()),
            Err(IoError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn prediction_rows_use_six_decimals() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("preds.csv");
        let preds = Predictions {
            sample_ids: vec!["id".into()],
            samples: vec![FusedSample {
                fused_scores: vec![0.7208204, 0.25],
                predicted_class: 0,
            }],
        };
        write_predictions(&preds, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "sample_id,predicted,fused_p_0,fused_p_1\nid,0,0.720820,0.250000\n");
        let first = fs::read(&p).unwrap();
        write_predictions(&preds, &p).unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
    }

    #[test]
    fn empty_predictions_are_not_written() {
        let dir = tempfile::tempdir().unwrap();
        let preds = Predictions {
            sample_ids: vec![],
            samples: vec![],
        };
        assert!(write_predictions(&preds, dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn alignment_checks_ids_not_just_counts() {
        let mk = |ids: &[&str]| DecisionScoreMatrix {
            classifier_name: "m".into(),
            sample_ids: ids.iter().map(|s| s.to_string()).collect(),
            labels: vec![None; ids.len()],
            scores: vec![vec![0.5, 0.5]; ids.len()],
            class_names: default_class_names(2),
        };
        assert!(check_alignment(&[mk(&["a", "b"]), mk(&["a", "b"])]).is_ok());
        assert!(matches!(
            check_alignment(&[mk(&["a", "b"]), mk(&["b", "a"])]),
            Err(IoError::SampleAlignmentError(_))
        ));
        assert!(check_alignment(&[mk(&["a"]), mk(&["a", "b"])]).is_err());
    }

    #[test]
    fn labels_align_by_id() {
        let l = Labels {
            sample_ids: vec!["b".into(), "a".into()],
            labels: vec![1, 0],
        };
        assert_eq!(l.aligned_to(&["a".into(), "b".into()]).unwrap(), vec![0, 1]);
        assert!(l.aligned_to(&["c".into()]).is_err());
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.csv", "sample_id,label,p_0\nx,0,1\n");
        write(dir.path(), "labels.csv", "sample_id,label\nx,0\n");
        let mp = write(
            dir.path(),
            "manifest.json",
            r#"{"score_files":["a.csv"],"labels_file":"labels.csv","integral":"choquet","seed":3}"#,
        );
        let m = ExperimentManifest::load(&mp).unwrap();
        assert_eq!(m.integral, IntegralKind::Choquet);
        assert!(m.score_files[0].is_absolute() || m.score_files[0].starts_with(dir.path()));
        let bad = write(
            dir.path(),
            "bad.json",
            r#"{"score_files":["missing.csv"],"labels_file":"labels.csv"}"#,
        );
        assert!(matches!(ExperimentManifest::load(&bad), Err(IoError::ManifestError(_))));
    }
}
