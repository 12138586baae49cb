use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fuzzfuse::divergence::{pairwise_divergences, Reduction, DEFAULT_SMOOTHING};
use fuzzfuse::experiment::{
    run_compare, run_sweep, CompareOptions, CompareRule, Experiment, SweepSpec,
    DEFAULT_MAX_COMBINATIONS,
};
use fuzzfuse::io::{
    load_labels, load_predicted_classes, load_scores, seed_override,
    write_labels, write_predictions, write_scores, ExperimentManifest, LoadOptions,
};
use fuzzfuse::metrics::{evaluate, Aggregation, MetricConvention};
use fuzzfuse::stats::{mcnemar, McNemarResult};
use fuzzfuse::synth::{generate, SynthConfig, DEFAULT_CONCENTRATION, DEFAULT_ERROR_CONCENTRATION, PRNG_ALGORITHM};
use fuzzfuse::{fuse_dataset, ClampPolicy, Error, FuzzyDensitySet, IntegralKind};

#[derive(Parser)]
#[command(name = "fuzzfuse", version, about = "Fuzzy-integral fusion of classifier decision scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse score files with a fuzzy integral and write predictions.
    Fuse(FuseArgs),
    /// Evaluate a predictions file against labels.
    Eval(EvalArgs),
    /// Compare fuzzy fusion against classical ensemble rules.
    Compare(CompareArgs),
    /// Evaluate fusion accuracy over a grid of density tuples.
    Sweep(SweepArgs),
    /// Pairwise KL and JS divergences between score files.
    Diverge(DivergeArgs),
    /// McNemar's test between two prediction sets.
    Mcnemar(McnemarArgs),
    /// Generate synthetic score files.
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Experiment manifest (JSON); supplies scores, labels and densities.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Score CSV files, one per classifier.
    #[arg(long, num_args = 1..)]
    scores: Vec<PathBuf>,
    /// Labels CSV (`sample_id,label`).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Fuzzy densities, one per score file.
    #[arg(long, value_delimiter = ',')]
    densities: Option<Vec<f64>>,
    /// Rescale rows whose sums drift from 1 instead of rejecting them.
    #[arg(long)]
    renormalize: bool,
    /// Reject densities of 1 instead of clamping them to 1 - 1e-6.
    #[arg(long)]
    strict_densities: bool,
}

impl InputArgs {
    fn policy(&self) -> ClampPolicy {
        if self.strict_densities {
            ClampPolicy::Reject
        } else {
            ClampPolicy::default()
        }
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            renormalize: self.renormalize,
        }
    }

    fn manifest(&self) -> Result<Option<ExperimentManifest>, Error> {
        self.manifest
            .as_ref()
            .map(ExperimentManifest::load)
            .transpose()
            .map_err(Error::from)
    }

    fn experiment(&self) -> Result<Experiment, Error> {
        let mut exp = match self.manifest()? {
            Some(m) => Experiment::from_manifest(&m, self.load_options())?,
            None => {
                Experiment::load(&self.scores, self.labels.as_deref(), self.load_options())?
            }
        };
        if self.densities.is_some() {
            exp.densities = self.densities.clone();
        }
        Ok(exp)
    }
}

#[derive(Args)]
struct FuseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_parser = parse_kind)]
    integral: Option<IntegralKind>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions file or a score file (argmax is taken).
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "as-printed")]
    metric_convention: MetricConvention,
    #[arg(long, default_value = "macro")]
    aggregate: Aggregation,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `all` or a comma-separated subset of majority,average,weighted_average,product,maximum,choquet,sugeno,alg1.
    #[arg(long, default_value = "all")]
    rules: String,
    /// Weighted-average weights.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 1.0])]
    grid: Vec<f64>,
    #[arg(long, value_parser = parse_kind)]
    integral: Option<IntegralKind>,
    #[arg(long, default_value_t = DEFAULT_MAX_COMBINATIONS)]
    max_combinations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DivergeArgs {
    #[arg(long, num_args = 2.., required = true)]
    scores: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "mean-sample")]
    reduce: Reduction,
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smoothing: f64,
    #[arg(long)]
    renormalize: bool,
}

#[derive(Args)]
struct McnemarArgs {
    /// Predictions (or score file) of the first model; the ensemble in `--all` mode.
    #[arg(long)]
    preds_a: PathBuf,
    /// Predictions (or score file) of the second model.
    #[arg(long, required_unless_present = "all")]
    preds_b: Option<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    /// Compare `--preds-a` against every file given with `--scores`.
    #[arg(long, requires = "scores")]
    all: bool,
    #[arg(long, num_args = 1..)]
    scores: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 3)]
    classifiers: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.88, 0.93, 0.93])]
    accuracies: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    correlation: f64,
    #[arg(long, default_value_t = DEFAULT_CONCENTRATION)]
    concentration: f64,
    /// Peak parameter for wrong predictions.
    #[arg(long, default_value_t = DEFAULT_ERROR_CONCENTRATION)]
    error_concentration: f64,
    /// Defaults to $FUZZFUSE_SEED, then 7.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_kind(s: &str) -> Result<IntegralKind, String> {
    s.parse()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| io_error(path, source))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    fuzzfuse::io::IoError::Io {
        path: path.display().to_string(),
        source,
    }
    .into()
}

fn fuse(args: FuseArgs) -> Result<(), Error> {
    let manifest = args.input.manifest()?;
    let integral = args
        .integral
        .or(manifest.as_ref().map(|m| m.integral))
        .unwrap_or_default();
    let (matrices, raw) = match (&manifest, &args.input.densities) {
        (_, Some(d)) if manifest.is_none() => {
            let matrices = args
                .input
                .scores
                .iter()
                .map(|p| load_scores(p, args.input.load_options()))
                .collect::<Result<Vec<_>, _>>()?;
            (matrices, d.clone())
        }
        _ => {
            // Densities from the manifest, or each classifier's accuracy.
            let exp = args.input.experiment()?;
            let d = exp.densities_or_accuracy()?;
            (exp.matrices, d)
        }
    };
    let densities = FuzzyDensitySet::new(&raw, args.input.policy())?;
    let preds = fuse_dataset(&matrices, &densities, integral)?;
    write_predictions(&preds, &args.out)?;
    eprintln!(
        "fused {} samples with {} (lambda = {:.6})",
        preds.samples.len(),
        integral,
        densities.lambda()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Error> {
    let (ids, predicted) = load_predicted_classes(&args.preds)?;
    let labels = load_labels(&args.labels)?.aligned_to(&ids)?;
    let classes = predicted.iter().chain(&labels).map(|c| c + 1).max().unwrap_or(0);
    let report = evaluate(
        &ids,
        &predicted,
        &labels,
        &fuzzfuse::io::default_class_names(classes),
        args.metric_convention,
        args.aggregate,
    )?;
    println!("{report}");
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Error> {
    let exp = args.input.experiment()?;
    let rules_arg = if args.rules == "all" && !exp.rules.is_empty() {
        exp.rules.join(",")
    } else {
        args.rules.clone()
    };
    let opts = CompareOptions {
        rules: CompareRule::parse_list(&rules_arg)?,
        weights: args.weights,
        densities: exp.densities.clone(),
        policy: args.input.policy(),
        ..CompareOptions::default()
    };
    let report = run_compare(&exp, &opts)?;
    println!("{report}");
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let exp = args.input.experiment()?;
    let spec = SweepSpec {
        density_grid: args.grid,
        integral: args.integral.unwrap_or(exp.integral),
        max_combinations: args.max_combinations,
    };
    let report = run_sweep(&exp, &spec, args.input.policy(), Default::default())?;
    println!("{report}");
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    Ok(())
}

fn diverge(args: DivergeArgs) -> Result<(), Error> {
    let opts = LoadOptions {
        renormalize: args.renormalize,
    };
    let matrices = args
        .scores
        .iter()
        .map(|p| load_scores(p, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let table = pairwise_divergences(&matrices, args.reduce, args.smoothing)?;
    print!("{}", table.to_text());
    if let Some(out) = &args.out {
        write_json(&table, out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct McnemarRow {
    model_a: String,
    model_b: String,
    #[serde(flatten)]
    result: McNemarResult,
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn mcnemar_pair(a: &Path, b: &Path, labels: &fuzzfuse::io::Labels) -> Result<McnemarRow, Error> {
    let (ids_a, pa) = load_predicted_classes(a)?;
    let (ids_b, pb) = load_predicted_classes(b)?;
    if ids_a != ids_b {
        return Err(fuzzfuse::io::IoError::SampleAlignmentError(format!(
            "{} and {} list different samples",
            a.display(),
            b.display()
        ))
        .into());
    }
    let truth = labels.aligned_to(&ids_a)?;
    Ok(McnemarRow {
        model_a: model_name(a),
        model_b: model_name(b),
        result: mcnemar(&pa, &pb, &truth)?,
    })
}

fn run_mcnemar(args: McnemarArgs) -> Result<(), Error> {
    let labels = load_labels(&args.labels)?;
    let others: Vec<PathBuf> = if args.all {
        args.scores.clone()
    } else {
        args.preds_b.iter().cloned().collect()
    };
    let rows = others
        .iter()
        .map(|b| mcnemar_pair(&args.preds_a, b, &labels))
        .collect::<Result<Vec<_>, _>>()?;
    if args.all {
        let w = rows.iter().map(|r| r.model_b.len()).max().unwrap_or(0).max(13);
        println!("{:<w$}  {:>5}  {:>5}  {:>10}  {:>12}  method", "Compared with", "b", "c", "statistic", "p-value");
        for r in &rows {
            println!(
                "{:<w$}  {:>5}  {:>5}  {:>10.4}  {:>12.6e}  {}",
                r.model_b,
                r.result.b,
                r.result.c,
                r.result.statistic,
                r.result.p_value,
                r.result.method.as_str()
            );
        }
    } else {
        let r = &rows[0].result;
        println!("b = {}", r.b);
        println!("c = {}", r.c);
        println!("statistic = {:.6}", r.statistic);
        println!("p = {:.6e}", r.p_value);
        println!("method = {}", r.method.as_str());
        if r.all_agree {
            println!("note: no discordant samples");
        }
    }
    if let Some(out) = &args.out {
        write_json(&rows, out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthProvenance<'a> {
    prng: &'static str,
    config: &'a SynthConfig,
    score_files: Vec<String>,
    labels_file: &'static str,
}

fn synth(args: SynthArgs) -> Result<(), Error> {
    let seed = args.seed.or_else(seed_override).unwrap_or(7);
    let config = SynthConfig {
        samples: args.samples,
        classes: args.classes,
        classifiers: args.classifiers,
        accuracies: args.accuracies,
        correlation: args.correlation,
        concentration: args.concentration,
        error_concentration: args.error_concentration,
        seed,
    };
    let out = generate(&config)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_error(&args.out_dir, e))?;
    let mut score_files = Vec::new();
    for m in &out.matrices {
        let name = format!("{}.csv", m.classifier_name);
        write_scores(m, args.out_dir.join(&name))?;
        score_files.push(name);
    }
    write_labels(&out.labels, args.out_dir.join("labels.csv"))?;
    let provenance = SynthProvenance {
        prng: PRNG_ALGORITHM,
        config: &config,
        score_files: score_files.clone(),
        labels_file: "labels.csv",
    };
    write_json(&provenance, &args.out_dir.join("synth.json"))?;
    let manifest = ExperimentManifest {
        score_files: score_files.iter().map(PathBuf::from).collect(),
        densities: None,
        labels_file: PathBuf::from("labels.csv"),
        integral: IntegralKind::default(),
        rules: Vec::new(),
        seed: Some(seed),
    };
    write_json(&manifest, &args.out_dir.join("manifest.json"))?;
    eprintln!(
        "wrote {} score files with {} samples to {}",
        out.matrices.len(),
        config.samples,
        args.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Diverge(a) => diverge(a),
        Command::Mcnemar(a) => run_mcnemar(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
