//! The `drivestyle` command line: `gen`, `train`, `classify` and `eval`.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.
//! Option values resolve as command-line flag, then `--config` file, then the
//! built-in default.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::classifier::{ClassifierModel, ModelMetadata, ThresholdTable, TrainConfig};
use crate::datagen::{generate_corpus, load_archetypes, reference_archetypes};
use crate::error::{Error, Result};
use crate::eval::{
    cross_validate, render_report, write_trace_file, CvConfig, LevelCounts, ReportMetadata,
    RunTrace, TraceRow, DEFAULT_CV_SEED,
};
use crate::fuzzy::{FisConfig, FuzzySystem};
use crate::kde::Bandwidth;
use crate::level::{DriverClass, StyleLevel};
use crate::telemetry::{load_corpus, write_corpus_file, DriverRun, Feature};
use crate::TOOL_VERSION;

pub const DEFAULT_GEN_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(
    name = "drivestyle",
    version,
    about = "Driving-style recognition from speed and throttle telemetry"
)]
pub struct Cli {
    /// JSON file with default option values (flags take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for classification [default: available parallelism].
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus.
    Gen(GenArgs),
    /// Train the proposed recognizer on a labeled corpus.
    Train(TrainArgs),
    /// Classify every sample of a corpus and write a trace CSV.
    Classify(ClassifyArgs),
    /// Cross-validate the proposed recognizer against the fuzzy baseline.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Archetype JSON file [default: the 18 built-in reference drivers].
    #[arg(long)]
    pub archetypes: Option<PathBuf>,
    /// Comma-separated 1-based archetype rows to keep.
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<usize>>,
    /// Runs generated per archetype [default: 1].
    #[arg(long)]
    pub runs_per: Option<usize>,
    /// Samples per run, overriding the archetype file.
    #[arg(long)]
    pub run_length: Option<usize>,
    /// Master seed [default: 7].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// `auto` or `speed=<λ>,throttle=<λ>` (missing features use auto).
    #[arg(long)]
    pub bandwidth: Option<BandwidthSpec>,
    /// Threshold table JSON [default: built-in table].
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Proposed,
    Fuzzy,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Model file (required for the proposed method).
    #[arg(short, long)]
    pub model: Option<PathBuf>,
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Recognizer to run [default: proposed].
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Fuzzy system JSON [default: built-in configuration].
    #[arg(long)]
    pub fis: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output prefix; writes <prefix>.json, <prefix>.txt and trace CSVs.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Number of folds [default: 9].
    #[arg(long)]
    pub folds: Option<usize>,
    /// Folds used for training [default: 5].
    #[arg(long)]
    pub train_folds: Option<usize>,
    /// Fold shuffling seed [default: 2016].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validate every rotation of the training block.
    #[arg(long)]
    pub rotate: bool,
    #[arg(long)]
    pub bandwidth: Option<BandwidthSpec>,
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[arg(long)]
    pub fis: Option<PathBuf>,
}

/// Bandwidth choice per feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSpec {
    pub speed: Bandwidth,
    pub throttle: Bandwidth,
}

impl Default for BandwidthSpec {
    fn default() -> Self {
        BandwidthSpec {
            speed: Bandwidth::silverman_for(Feature::Speed),
            throttle: Bandwidth::silverman_for(Feature::Throttle),
        }
    }
}

impl FromStr for BandwidthSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut spec = BandwidthSpec::default();
        if s.trim() == "auto" {
            return Ok(spec);
        }
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected feature=value, got `{part}`"))?;
            let bw = match value.trim() {
                "auto" => None,
                v => {
                    let x: f64 = v.parse().map_err(|_| format!("bad bandwidth `{v}`"))?;
                    if !(x.is_finite() && x > 0.0) {
                        return Err(format!("bandwidth must be positive, got {x}"));
                    }
                    Some(Bandwidth::fixed(x))
                }
            };
            match key.trim() {
                "speed" => {
                    spec.speed = bw.unwrap_or_else(|| Bandwidth::silverman_for(Feature::Speed))
                }
                "throttle" => {
                    spec.throttle =
                        bw.unwrap_or_else(|| Bandwidth::silverman_for(Feature::Throttle))
                }
                other => return Err(format!("unknown feature `{other}`")),
            }
        }
        Ok(spec)
    }
}

impl<'de> Deserialize<'de> for BandwidthSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

fn describe_bandwidth(bw: Bandwidth) -> String {
    match bw {
        Bandwidth::Fixed { value } => format!("{value}"),
        Bandwidth::Silverman { floor } => format!("auto(floor {floor})"),
    }
}

/// Defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub archetypes: Option<PathBuf>,
    pub rows: Option<Vec<usize>>,
    pub runs_per: Option<usize>,
    pub run_length: Option<usize>,
    pub seed: Option<u64>,
    pub bandwidth: Option<BandwidthSpec>,
    pub thresholds: Option<PathBuf>,
    pub fis: Option<PathBuf>,
    pub method: Option<MethodArg>,
    pub folds: Option<usize>,
    pub train_folds: Option<usize>,
    pub rotate: Option<bool>,
    pub threads: Option<usize>,
}

/// Error split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => crate::classifier::read_json::<ConfigFile>(path)?,
        None => ConfigFile::default(),
    };
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Gen(args) => cmd_gen(args, &config),
        Command::Train(args) => cmd_train(args, &config),
        Command::Classify(args) => cmd_classify(args, &config),
        Command::Eval(args) => cmd_eval(args, &config),
    }
}

fn header(command: &str, entries: &[(&str, String)]) {
    let body: Vec<String> = entries.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("# drivestyle {TOOL_VERSION} {command} {}", body.join(" "));
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn cmd_gen(args: GenArgs, config: &ConfigFile) -> std::result::Result<(), CliError> {
    let archetype_path = args.archetypes.or_else(|| config.archetypes.clone());
    let rows = args.rows.or_else(|| config.rows.clone());
    let runs_per = args.runs_per.or(config.runs_per).unwrap_or(1);
    let run_length = args.run_length.or(config.run_length);
    let seed = args.seed.or(config.seed).unwrap_or(DEFAULT_GEN_SEED);
    if runs_per == 0 {
        return Err(CliError::Usage("--runs-per must be positive".into()));
    }
    if run_length == Some(0) {
        return Err(CliError::Usage("--run-length must be positive".into()));
    }

    let mut specs = match &archetype_path {
        Some(p) => load_archetypes(p)?,
        None => reference_archetypes(),
    };
    if let Some(rows) = &rows {
        if let Some(bad) = rows.iter().find(|&&r| r == 0 || r > specs.len()) {
            return Err(CliError::Usage(format!(
                "row {bad} outside 1..={}",
                specs.len()
            )));
        }
        specs = rows.iter().map(|&r| specs[r - 1].clone()).collect();
    }
    if let Some(n) = run_length {
        for s in &mut specs {
            s.run_length = n;
        }
    }
    header(
        "gen",
        &[
            (
                "archetypes",
                archetype_path.as_deref().map_or("builtin".into(), path_str),
            ),
            ("count", specs.len().to_string()),
            ("runs_per", runs_per.to_string()),
            ("seed", seed.to_string()),
            ("output", path_str(&args.output)),
        ],
    );

    let corpus = generate_corpus(&specs, runs_per, seed)?;
    let comment = format!("drivestyle {TOOL_VERSION} seed={seed} runs_per={runs_per}");
    write_corpus_file(&corpus, &args.output, Some(&comment))?;
    print!("{}", corpus_summary(&corpus));
    Ok(())
}

/// Run/sample counts and pooled per-label moments.
pub fn corpus_summary(corpus: &[DriverRun]) -> String {
    let samples: usize = corpus.iter().map(DriverRun::len).sum();
    let mut out = format!("{} runs, {} samples\n", corpus.len(), samples);
    for label in [DriverClass::Aggressive, DriverClass::Normal] {
        let runs: Vec<&DriverRun> = corpus
            .iter()
            .filter(|r| r.label.class() == Some(label))
            .collect();
        if runs.is_empty() {
            continue;
        }
        let speed: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.samples.iter().map(|s| s.speed))
            .collect();
        let throttle: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.samples.iter().map(|s| s.throttle))
            .collect();
        let (sm, sv) = mean_var(&speed);
        let (tm, tv) = mean_var(&throttle);
        out.push_str(&format!(
            "  {label:<10} runs={:<3} speed mean={sm:.3} var={sv:.3}  throttle mean={tm:.3} var={tv:.3}\n",
            runs.len()
        ));
    }
    out
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn train_config(
    bandwidth: Option<BandwidthSpec>,
    thresholds: Option<PathBuf>,
    config: &ConfigFile,
) -> Result<(TrainConfig, BandwidthSpec, Option<PathBuf>)> {
    let bw = bandwidth.or(config.bandwidth).unwrap_or_default();
    let thresholds_path = thresholds.or_else(|| config.thresholds.clone());
    let thresholds = match &thresholds_path {
        Some(p) => ThresholdTable::load(p)?,
        None => ThresholdTable::default(),
    };
    Ok((
        TrainConfig {
            speed_bandwidth: bw.speed,
            throttle_bandwidth: bw.throttle,
            thresholds,
        },
        bw,
        thresholds_path,
    ))
}

pub fn cmd_train(args: TrainArgs, config: &ConfigFile) -> std::result::Result<(), CliError> {
    let (train, bw, thresholds_path) = train_config(args.bandwidth, args.thresholds, config)?;
    header(
        "train",
        &[
            ("input", path_str(&args.input)),
            ("output", path_str(&args.output)),
            ("speed_bandwidth", describe_bandwidth(bw.speed)),
            ("throttle_bandwidth", describe_bandwidth(bw.throttle)),
            (
                "thresholds",
                thresholds_path
                    .as_deref()
                    .map_or("builtin".into(), path_str),
            ),
        ],
    );
    let corpus = load_corpus(&args.input)?;
    let model = ClassifierModel::train(&corpus, &train)?;
    model.save(
        &args.output,
        ModelMetadata {
            tool_version: TOOL_VERSION.to_string(),
            ..Default::default()
        },
    )?;
    for feature in Feature::ALL {
        for class in DriverClass::ALL {
            let kde = model.kde(feature, class);
            println!(
                "{feature:<8} {class:<10} N={:<7} bandwidth={:.6} mean={:.4}",
                kde.len(),
                kde.bandwidth(),
                kde.mean()
            );
        }
    }
    Ok(())
}

pub fn cmd_classify(args: ClassifyArgs, config: &ConfigFile) -> std::result::Result<(), CliError> {
    let method = args.method.or(config.method).unwrap_or(MethodArg::Proposed);
    let fis_path = args.fis.or_else(|| config.fis.clone());
    let model_path = match (method, &args.model) {
        (MethodArg::Proposed, None) => {
            return Err(CliError::Usage(
                "--model is required for the proposed method".into(),
            ))
        }
        (_, m) => m.clone(),
    };
    header(
        "classify",
        &[
            ("method", format!("{method:?}").to_lowercase()),
            ("model", model_path.as_deref().map_or("-".into(), path_str)),
            (
                "fis",
                fis_path.as_deref().map_or("builtin".into(), path_str),
            ),
            ("input", path_str(&args.input)),
            ("output", path_str(&args.output)),
        ],
    );

    let corpus = load_corpus(&args.input)?;
    let mut traces = Vec::with_capacity(corpus.len());
    match method {
        MethodArg::Proposed => {
            let model = ClassifierModel::load(model_path.expect("checked above"))?;
            for run in &corpus {
                let decisions = model.classify_run(run)?;
                traces.push(trace_of(
                    run,
                    decisions
                        .iter()
                        .map(|d| (d.level, Some((d.d_agg, d.d_norm)))),
                ));
            }
        }
        MethodArg::Fuzzy => {
            let fis = load_fis(fis_path.as_deref())?;
            for run in &corpus {
                let decisions = fis.classify_run(run)?;
                traces.push(trace_of(run, decisions.iter().map(|d| (d.level, None))));
            }
        }
    }
    let comment = format!("drivestyle {TOOL_VERSION} method={method:?}").to_lowercase();
    write_trace_file(&args.output, &traces, Some(&comment))?;

    for (run, trace) in corpus.iter().zip(&traces) {
        let levels: Vec<StyleLevel> = trace.rows.iter().map(|r| r.level).collect();
        let counts = LevelCounts::tally(&levels);
        let majority = if counts.count_class(DriverClass::Aggressive)
            > counts.count_class(DriverClass::Normal)
        {
            DriverClass::Aggressive
        } else {
            DriverClass::Normal
        };
        let crr = match run.label.class() {
            Some(c) => format!("{:.3}", counts.crr(c)?),
            None => "-".into(),
        };
        println!(
            "{:<16} label={:<10} samples={:<6} majority={:<10} crr={crr}",
            run.run_id,
            run.label.as_str(),
            run.len(),
            majority.as_str()
        );
    }
    Ok(())
}

fn trace_of(
    run: &DriverRun,
    rows: impl Iterator<Item = (StyleLevel, Option<(f64, f64)>)>,
) -> RunTrace {
    RunTrace {
        run_id: run.run_id.clone(),
        rotation: 0,
        rows: run
            .samples
            .iter()
            .zip(rows)
            .map(|(s, (level, distances))| TraceRow {
                t: s.t,
                level,
                distances,
            })
            .collect(),
    }
}

fn load_fis(path: Option<&Path>) -> Result<FuzzySystem> {
    match path {
        Some(p) => FuzzySystem::new(FisConfig::load(p)?),
        None => Ok(FuzzySystem::default()),
    }
}

pub fn cmd_eval(args: EvalArgs, config: &ConfigFile) -> std::result::Result<(), CliError> {
    let folds = args.folds.or(config.folds).unwrap_or(9);
    let train_folds = args.train_folds.or(config.train_folds).unwrap_or(5);
    let seed = args.seed.or(config.seed).unwrap_or(DEFAULT_CV_SEED);
    let rotate = args.rotate || config.rotate.unwrap_or(false);
    let fis_path = args.fis.or_else(|| config.fis.clone());
    if folds < 2 || train_folds == 0 || train_folds >= folds {
        return Err(CliError::Usage(format!(
            "need folds >= 2 and 1 <= train-folds < folds (got {folds}, {train_folds})"
        )));
    }
    let (train, bw, thresholds_path) = train_config(args.bandwidth, args.thresholds, config)?;
    header(
        "eval",
        &[
            ("input", path_str(&args.input)),
            ("output", path_str(&args.output)),
            ("folds", folds.to_string()),
            ("train_folds", train_folds.to_string()),
            ("seed", seed.to_string()),
            ("rotate", rotate.to_string()),
            ("speed_bandwidth", describe_bandwidth(bw.speed)),
            ("throttle_bandwidth", describe_bandwidth(bw.throttle)),
            (
                "thresholds",
                thresholds_path
                    .as_deref()
                    .map_or("builtin".into(), path_str),
            ),
            (
                "fis",
                fis_path.as_deref().map_or("builtin".into(), path_str),
            ),
        ],
    );

    let corpus = load_corpus(&args.input)?;
    let fis = load_fis(fis_path.as_deref())?;
    let cv = CvConfig {
        folds,
        train_folds,
        seed,
        rotate,
        train,
    };
    let outcome = cross_validate(&corpus, &cv, &fis)?;
    let metadata = ReportMetadata {
        tool_version: TOOL_VERSION.to_string(),
        seed,
        folds,
        train_folds,
        rotate,
    };
    let paths = render_report(&outcome, metadata, &args.output)?;
    print!(
        "{}",
        std::fs::read_to_string(&paths.text).map_err(|e| Error::io(&paths.text, e))?
    );
    eprintln!(
        "wrote {}, {}, {}, {}",
        paths.json.display(),
        paths.text.display(),
        paths.proposed_traces.display(),
        paths.fuzzy_traces.display()
    );
    Ok(())
}
