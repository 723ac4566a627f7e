//! Correct-recognition rates, run-level cross-validation and report files.
//!
//! The CRR of a run is the fraction of its samples whose binary class equals
//! the run's label. Rates are computed per run and then averaged per class.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierModel, TrainConfig};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzySystem;
use crate::level::{Classified, DriverClass, StyleLevel};
use crate::telemetry::DriverRun;

/// Sample counts per style level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    #[serde(rename = "-3")]
    pub n3: u64,
    #[serde(rename = "-2")]
    pub n2: u64,
    #[serde(rename = "-1")]
    pub n1: u64,
    #[serde(rename = "0-")]
    pub zero_minus: u64,
    #[serde(rename = "0+")]
    pub zero_plus: u64,
    #[serde(rename = "1")]
    pub a1: u64,
    #[serde(rename = "2")]
    pub a2: u64,
    #[serde(rename = "3")]
    pub a3: u64,
}

impl LevelCounts {
    pub fn from_array(counts: [u64; 8]) -> Self {
        let [n3, n2, n1, zero_minus, zero_plus, a1, a2, a3] = counts;
        LevelCounts {
            n3,
            n2,
            n1,
            zero_minus,
            zero_plus,
            a1,
            a2,
            a3,
        }
    }

    pub fn to_array(self) -> [u64; 8] {
        [
            self.n3,
            self.n2,
            self.n1,
            self.zero_minus,
            self.zero_plus,
            self.a1,
            self.a2,
            self.a3,
        ]
    }

    pub fn tally<T: Classified>(decisions: &[T]) -> Self {
        let mut counts = [0u64; 8];
        for d in decisions {
            counts[d.level().index()] += 1;
        }
        LevelCounts::from_array(counts)
    }

    pub fn get(&self, level: StyleLevel) -> u64 {
        self.to_array()[level.index()]
    }

    pub fn total(&self) -> u64 {
        self.to_array().iter().sum()
    }

    /// Samples whose level falls in `class`.
    pub fn count_class(&self, class: DriverClass) -> u64 {
        StyleLevel::ALL
            .iter()
            .filter(|l| l.binary_class() == class)
            .map(|&l| self.get(l))
            .sum()
    }

    /// Fraction of samples recognized as `truth`.
    pub fn crr(&self, truth: DriverClass) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::NoDecisions);
        }
        Ok(self.count_class(truth) as f64 / total as f64)
    }
}

/// CRR of one run's decisions against its true class.
pub fn compute_crr<T: Classified>(decisions: &[T], truth: DriverClass) -> Result<f64> {
    LevelCounts::tally(decisions).crr(truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Proposed,
    FuzzyLogic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "Proposed",
            Method::FuzzyLogic => "FuzzyLogic",
        }
    }
}

/// Result for one validated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub label: DriverClass,
    pub level_counts: LevelCounts,
    pub crr: f64,
    /// Cross-validation rotation the run was validated in.
    #[serde(default)]
    pub rotation: usize,
}

/// Per-run and averaged recognition rates of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrrReport {
    pub method: Method,
    pub runs: Vec<RunResult>,
    pub average_crr_a: Option<f64>,
    pub average_crr_n: Option<f64>,
}

impl CrrReport {
    pub fn from_runs(method: Method, runs: Vec<RunResult>) -> Self {
        let average = |class| {
            let rates: Vec<f64> = runs
                .iter()
                .filter(|r| r.label == class)
                .map(|r| r.crr)
                .collect();
            (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
        };
        CrrReport {
            method,
            average_crr_a: average(DriverClass::Aggressive),
            average_crr_n: average(DriverClass::Normal),
            runs,
        }
    }

    pub fn average(&self, class: DriverClass) -> Option<f64> {
        match class {
            DriverClass::Aggressive => self.average_crr_a,
            DriverClass::Normal => self.average_crr_n,
        }
    }
}

/// Cross-validation setup. Defaults: nine folds, five for training.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    pub train_folds: usize,
    pub seed: u64,
    /// Validate every cyclic rotation of the training block instead of only
    /// the first.
    pub rotate: bool,
    pub train: TrainConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 9,
            train_folds: 5,
            seed: DEFAULT_CV_SEED,
            rotate: false,
            train: TrainConfig::default(),
        }
    }
}

pub const DEFAULT_CV_SEED: u64 = 2016;

/// Splits run indices into `folds` groups. Each class is shuffled with the
/// seeded generator and dealt round-robin, continuing where the previous
/// class stopped, so every fold gets one run per class when the counts allow.
pub fn stratified_folds(
    labels: &[DriverClass],
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidFolds(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if labels.len() < folds {
        return Err(Error::InvalidFolds(format!(
            "{} runs cannot populate {folds} folds",
            labels.len()
        )));
    }
    for class in DriverClass::ALL {
        if !labels.contains(&class) {
            return Err(Error::InvalidFolds(format!("corpus has no {class} runs")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); folds];
    let mut next = 0;
    for class in DriverClass::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for idx in members {
            assignment[next % folds].push(idx);
            next += 1;
        }
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    Ok(assignment)
}

/// One training/validation split over fold indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub rotation: usize,
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

/// Splits of the fold sequence: the training block is `train_folds`
/// consecutive folds (cyclically) starting at the rotation index.
pub fn fold_splits(folds: usize, train_folds: usize, rotate: bool) -> Result<Vec<Split>> {
    if train_folds == 0 || train_folds >= folds {
        return Err(Error::InvalidFolds(format!(
            "train folds must be in 1..{folds}, got {train_folds}"
        )));
    }
    let rotations = if rotate { folds } else { 1 };
    Ok((0..rotations)
        .map(|r| {
            let train: Vec<usize> = (0..train_folds).map(|k| (r + k) % folds).collect();
            let validate = (0..folds).filter(|f| !train.contains(f)).collect();
            Split {
                rotation: r,
                train,
                validate,
            }
        })
        .collect())
}

/// One trace row per classified sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub level: StyleLevel,
    pub distances: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub run_id: String,
    pub rotation: usize,
    pub rows: Vec<TraceRow>,
}

/// Everything produced by a cross-validation.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub proposed: CrrReport,
    pub fuzzy: CrrReport,
    pub proposed_traces: Vec<RunTrace>,
    pub fuzzy_traces: Vec<RunTrace>,
    pub folds: Vec<Vec<String>>,
}

/// Runs the fold protocol: the proposed model is trained on the training
/// folds and both recognizers are scored on every run of the validation
/// folds.
pub fn cross_validate(
    corpus: &[DriverRun],
    config: &CvConfig,
    fis: &FuzzySystem,
) -> Result<CvOutcome> {
    let labels = corpus
        .iter()
        .map(|r| {
            if r.is_empty() {
                return Err(Error::EmptyRun(r.run_id.clone()));
            }
            r.class()
        })
        .collect::<Result<Vec<_>>>()?;
    let folds = stratified_folds(&labels, config.folds, config.seed)?;
    let splits = fold_splits(config.folds, config.train_folds, config.rotate)?;

    let mut proposed = Vec::new();
    let mut fuzzy = Vec::new();
    let mut proposed_traces = Vec::new();
    let mut fuzzy_traces = Vec::new();

    for split in &splits {
        let train: Vec<DriverRun> = split
            .train
            .iter()
            .flat_map(|&f| folds[f].iter().map(|&i| corpus[i].clone()))
            .collect();
        let model = ClassifierModel::train(&train, &config.train)?;
        log::info!(
            "rotation {}: trained on {} runs, validating {} folds",
            split.rotation,
            train.len(),
            split.validate.len()
        );

        for &i in split.validate.iter().flat_map(|&f| folds[f].iter()) {
            let run = &corpus[i];
            let label = labels[i];

            let decisions = model.classify_run(run)?;
            proposed.push(run_result(run, label, split.rotation, &decisions)?);
            proposed_traces.push(RunTrace {
                run_id: run.run_id.clone(),
                rotation: split.rotation,
                rows: run
                    .samples
                    .iter()
                    .zip(&decisions)
                    .map(|(s, d)| TraceRow {
                        t: s.t,
                        level: d.level,
                        distances: Some((d.d_agg, d.d_norm)),
                    })
                    .collect(),
            });

            let decisions = fis.classify_run(run)?;
            fuzzy.push(run_result(run, label, split.rotation, &decisions)?);
            fuzzy_traces.push(RunTrace {
                run_id: run.run_id.clone(),
                rotation: split.rotation,
                rows: run
                    .samples
                    .iter()
                    .zip(&decisions)
                    .map(|(s, d)| TraceRow {
                        t: s.t,
                        level: d.level,
                        distances: None,
                    })
                    .collect(),
            });
        }
    }

    Ok(CvOutcome {
        proposed: CrrReport::from_runs(Method::Proposed, proposed),
        fuzzy: CrrReport::from_runs(Method::FuzzyLogic, fuzzy),
        proposed_traces,
        fuzzy_traces,
        folds: folds
            .iter()
            .map(|f| f.iter().map(|&i| corpus[i].run_id.clone()).collect())
            .collect(),
    })
}

fn run_result<T: Classified>(
    run: &DriverRun,
    label: DriverClass,
    rotation: usize,
    decisions: &[T],
) -> Result<RunResult> {
    let level_counts = LevelCounts::tally(decisions);
    Ok(RunResult {
        run_id: run.run_id.clone(),
        label,
        crr: level_counts.crr(label)?,
        level_counts,
        rotation,
    })
}

/// Provenance recorded in report files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub seed: u64,
    pub folds: usize,
    pub train_folds: usize,
    pub rotate: bool,
}

/// Difference between the two methods on one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodDelta {
    pub proposed: f64,
    pub fuzzy_logic: f64,
    /// `proposed − fuzzy_logic`
    pub absolute: f64,
    /// `(proposed − fuzzy_logic) / fuzzy_logic`, in percent.
    pub relative_percent: f64,
}

impl MethodDelta {
    fn new(proposed: f64, fuzzy_logic: f64) -> Self {
        MethodDelta {
            proposed,
            fuzzy_logic,
            absolute: proposed - fuzzy_logic,
            relative_percent: 100.0 * (proposed - fuzzy_logic) / fuzzy_logic,
        }
    }
}

/// The JSON report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub metadata: ReportMetadata,
    pub reports: Vec<CrrReport>,
    pub delta_crr_a: Option<MethodDelta>,
    pub delta_crr_n: Option<MethodDelta>,
}

impl ReportDocument {
    pub fn new(metadata: ReportMetadata, proposed: &CrrReport, fuzzy: &CrrReport) -> Self {
        let delta = |class| match (proposed.average(class), fuzzy.average(class)) {
            (Some(p), Some(f)) => Some(MethodDelta::new(p, f)),
            _ => None,
        };
        ReportDocument {
            delta_crr_a: delta(DriverClass::Aggressive),
            delta_crr_n: delta(DriverClass::Normal),
            metadata,
            reports: vec![proposed.clone(), fuzzy.clone()],
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::classifier::read_json(path.as_ref())
    }
}

/// Paths written by [`render_report`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub text: PathBuf,
    pub proposed_traces: PathBuf,
    pub fuzzy_traces: PathBuf,
}

impl ReportPaths {
    pub fn for_prefix(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut p = prefix.as_os_str().to_owned();
            p.push(suffix);
            PathBuf::from(p)
        };
        ReportPaths {
            json: with(".json"),
            text: with(".txt"),
            proposed_traces: with(".proposed.traces.csv"),
            fuzzy_traces: with(".fuzzy.traces.csv"),
        }
    }
}

/// Writes `<prefix>.json`, `<prefix>.txt` and one trace CSV per method.
pub fn render_report(
    outcome: &CvOutcome,
    metadata: ReportMetadata,
    prefix: impl AsRef<Path>,
) -> Result<ReportPaths> {
    let paths = ReportPaths::for_prefix(prefix.as_ref());
    let doc = ReportDocument::new(metadata.clone(), &outcome.proposed, &outcome.fuzzy);

    let json = serde_json::to_string_pretty(&doc).map_err(|e| Error::json(&paths.json, e))?;
    write_file(&paths.json, format!("{json}\n").as_bytes())?;
    write_file(&paths.text, render_text(&doc).as_bytes())?;

    let comment = format!(
        "drivestyle {} seed={} folds={} train_folds={}",
        metadata.tool_version, metadata.seed, metadata.folds, metadata.train_folds
    );
    write_trace_file(
        &paths.proposed_traces,
        &outcome.proposed_traces,
        Some(&comment),
    )?;
    write_trace_file(&paths.fuzzy_traces, &outcome.fuzzy_traces, Some(&comment))?;
    Ok(paths)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub const TRACE_HEADER: [&str; 6] = ["run_id", "t", "level", "binary_class", "d_agg", "d_norm"];

pub fn write_trace_file(path: &Path, traces: &[RunTrace], comment: Option<&str>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_traces(&mut out, traces, comment)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Trace CSV: `run_id,t,level,binary_class,d_agg,d_norm`; the distance
/// columns are empty for the fuzzy baseline.
pub fn write_traces<W: Write>(
    mut out: W,
    traces: &[RunTrace],
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(|e| Error::io("<traces>", e))?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(TRACE_HEADER)?;
    for trace in traces {
        for row in &trace.rows {
            let (da, dn) = match row.distances {
                Some((a, n)) => (format!("{a:.9}"), format!("{n:.9}")),
                None => (String::new(), String::new()),
            };
            wtr.write_record([
                trace.run_id.as_str(),
                &format!("{:.6}", row.t),
                row.level.as_str(),
                row.level.binary_class().as_str(),
                &da,
                &dn,
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<traces>", e))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

/// Aligned text rendering: per-method level tables, then the comparison.
pub fn render_text(doc: &ReportDocument) -> String {
    let mut s = String::new();
    let m = &doc.metadata;
    let _ = writeln!(
        s,
        "drivestyle {}  seed={}  folds={}  train_folds={}  rotate={}",
        m.tool_version, m.seed, m.folds, m.train_folds, m.rotate
    );

    for report in &doc.reports {
        let _ = writeln!(s, "\n[{}] level counts", report.method.as_str());
        let _ = write!(s, "{:<16} {:<10}", "run", "label");
        for level in StyleLevel::ALL {
            let _ = write!(s, " {:>6}", level.as_str());
        }
        let _ = writeln!(s, " {:>7} {:>7}", "CRR_a", "CRR_n");
        for run in &report.runs {
            let _ = write!(s, "{:<16} {:<10}", run.run_id, run.label.as_str());
            for c in run.level_counts.to_array() {
                let _ = write!(s, " {c:>6}");
            }
            let (a, n) = match run.label {
                DriverClass::Aggressive => (Some(run.crr), None),
                DriverClass::Normal => (None, Some(run.crr)),
            };
            let _ = writeln!(s, " {:>7} {:>7}", fmt_opt(a), fmt_opt(n));
        }
        let _ = writeln!(
            s,
            "{:<16} {:<10}{} {:>7} {:>7}",
            "Average",
            "",
            " ".repeat(7 * StyleLevel::ALL.len()),
            fmt_opt(report.average_crr_a),
            fmt_opt(report.average_crr_n)
        );
    }

    if let [proposed, fuzzy] = doc.reports.as_slice() {
        let _ = writeln!(s, "\nComparison");
        let _ = writeln!(
            s,
            "{:<16} {:<10} {:>9} {:>9} {:>9}",
            "run", "label", "FL", "Proposed", "delta"
        );
        for (p, f) in proposed.runs.iter().zip(&fuzzy.runs) {
            let _ = writeln!(
                s,
                "{:<16} {:<10} {:>9.3} {:>9.3} {:>+9.3}",
                p.run_id,
                p.label.as_str(),
                f.crr,
                p.crr,
                p.crr - f.crr
            );
        }
        for (name, delta) in [
            ("Average CRR_a", doc.delta_crr_a),
            ("Average CRR_n", doc.delta_crr_n),
        ] {
            if let Some(d) = delta {
                let _ = writeln!(
                    s,
                    "{:<27} {:>9.3} {:>9.3} {:>+9.3} ({:+.2}%)",
                    name, d.fuzzy_logic, d.proposed, d.absolute, d.relative_percent
                );
            }
        }
    }
    s
}
