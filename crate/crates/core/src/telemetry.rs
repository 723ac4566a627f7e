//! Telemetry samples, labeled driver runs and the corpus CSV format.
//!
//! A corpus file holds one row per sample:
//!
//! ```text
//! run_id,label,t,speed,throttle
//! a-01,aggressive,0.000000,48.120000,0.530000
//! ```
//!
//! Rows of one run are contiguous and strictly time-ordered. Lines starting
//! with `#` are metadata comments and are ignored on load.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::DriverClass;

/// Nominal acquisition rate of the driving simulator.
pub const NOMINAL_SAMPLE_RATE_HZ: f64 = 50.0;

/// Decimal places written for every numeric corpus field.
pub const CORPUS_DECIMALS: usize = 6;

pub const CORPUS_HEADER: [&str; 5] = ["run_id", "label", "t", "speed", "throttle"];

/// Run label as stored in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Aggressive,
    Normal,
    Unlabeled,
}

impl Label {
    pub fn class(self) -> Option<DriverClass> {
        match self {
            Label::Aggressive => Some(DriverClass::Aggressive),
            Label::Normal => Some(DriverClass::Normal),
            Label::Unlabeled => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Aggressive => "aggressive",
            Label::Normal => "normal",
            Label::Unlabeled => "unlabeled",
        }
    }
}

impl From<DriverClass> for Label {
    fn from(class: DriverClass) -> Self {
        match class {
            DriverClass::Aggressive => Label::Aggressive,
            DriverClass::Normal => Label::Normal,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "aggressive" => Ok(Label::Aggressive),
            "normal" => Ok(Label::Normal),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(format!(
                "unknown label `{other}` (expected aggressive, normal or unlabeled)"
            )),
        }
    }
}

/// The two recognition features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Speed,
    Throttle,
}

impl Feature {
    pub const ALL: [Feature; 2] = [Feature::Speed, Feature::Throttle];

    /// Width of the feature's nominal operating range (km/h for speed).
    pub fn nominal_range(self) -> f64 {
        match self {
            Feature::Speed => 120.0,
            Feature::Throttle => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Speed => "speed",
            Feature::Throttle => "throttle",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feature vector `(speed, throttle)` of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub speed: f64,
    pub throttle: f64,
}

impl FeatureVector {
    pub fn new(speed: f64, throttle: f64) -> Self {
        FeatureVector { speed, throttle }
    }

    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::Speed => self.speed,
            Feature::Throttle => self.throttle,
        }
    }
}

/// One timestamped observation: seconds, km/h and throttle fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t: f64,
    pub speed: f64,
    pub throttle: f64,
}

impl TelemetrySample {
    pub fn new(t: f64, speed: f64, throttle: f64) -> Result<Self> {
        let sample = TelemetrySample { t, speed, throttle };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::InvalidSample(format!(
                "timestamp {} must be finite and non-negative",
                self.t
            )));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(Error::InvalidSample(format!(
                "speed {} must be finite and non-negative",
                self.speed
            )));
        }
        if !(0.0..=1.0).contains(&self.throttle) {
            return Err(Error::InvalidSample(format!(
                "throttle {} outside [0, 1]",
                self.throttle
            )));
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureVector {
        FeatureVector::new(self.speed, self.throttle)
    }
}

/// A contiguous recording of one driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverRun {
    pub run_id: String,
    pub label: Label,
    pub samples: Vec<TelemetrySample>,
    pub sample_rate_hz: f64,
}

impl DriverRun {
    /// Builds a run, checking every sample and the time ordering.
    pub fn new(
        run_id: impl Into<String>,
        label: Label,
        samples: Vec<TelemetrySample>,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let run = DriverRun {
            run_id: run_id.into(),
            label,
            samples,
            sample_rate_hz,
        };
        run.validate()?;
        Ok(run)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidSample(format!(
                "run `{}`: sample rate {} must be positive",
                self.run_id, self.sample_rate_hz
            )));
        }
        for s in &self.samples {
            s.validate()?;
        }
        if let Some(w) = self.samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidSample(format!(
                "run `{}`: timestamp {} does not increase after {}",
                self.run_id, w[1].t, w[0].t
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The run's class, or an error for unlabeled runs.
    pub fn class(&self) -> Result<DriverClass> {
        self.label
            .class()
            .ok_or_else(|| Error::Unlabeled(self.run_id.clone()))
    }
}

/// Projects a run onto its `(speed, throttle)` feature sequence.
pub fn extract_features(run: &DriverRun) -> Result<Vec<FeatureVector>> {
    if run.is_empty() {
        return Err(Error::EmptyRun(run.run_id.clone()));
    }
    Ok(run.samples.iter().map(TelemetrySample::features).collect())
}

#[derive(Debug, Deserialize)]
struct CorpusRow {
    run_id: String,
    label: String,
    t: f64,
    speed: f64,
    throttle: f64,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<DriverRun>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(file, path)
}

/// Reads a corpus from any reader; `origin` is only used in error messages.
pub fn read_corpus<R: Read>(reader: R, origin: &Path) -> Result<Vec<DriverRun>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CORPUS_HEADER) {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                CORPUS_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut runs: Vec<DriverRun> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr
            .read_record(&mut record)
            .map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let row: CorpusRow = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, format!("malformed row: {e}")))?;
        let label: Label = row.label.parse().map_err(|m| parse_err(line, m))?;
        let sample = TelemetrySample::new(row.t, row.speed, row.throttle)
            .map_err(|e| parse_err(line, e.to_string()))?;

        match runs.last_mut() {
            Some(run) if run.run_id == row.run_id => {
                if run.label != label {
                    return Err(parse_err(
                        line,
                        format!(
                            "run `{}` changes label from {} to {}",
                            row.run_id, run.label, label
                        ),
                    ));
                }
                let prev = run.samples.last().expect("runs are created with a sample");
                if sample.t <= prev.t {
                    return Err(parse_err(
                        line,
                        format!(
                            "timestamp {} does not increase after {} in run `{}`",
                            sample.t, prev.t, row.run_id
                        ),
                    ));
                }
                run.samples.push(sample);
            }
            _ => {
                if runs.iter().any(|r| r.run_id == row.run_id) {
                    return Err(parse_err(
                        line,
                        format!("rows of run `{}` are not contiguous", row.run_id),
                    ));
                }
                runs.push(DriverRun {
                    run_id: row.run_id,
                    label,
                    samples: vec![sample],
                    sample_rate_hz: NOMINAL_SAMPLE_RATE_HZ,
                });
            }
        }
    }

    for run in &mut runs {
        run.sample_rate_hz = estimate_sample_rate(&run.samples);
    }
    Ok(runs)
}

/// Mean sampling rate of a run, rounded to the corpus precision; runs with a
/// single sample get the nominal rate.
fn estimate_sample_rate(samples: &[TelemetrySample]) -> f64 {
    match (samples.first(), samples.last()) {
        (Some(first), Some(last)) if samples.len() > 1 => {
            let rate = (samples.len() - 1) as f64 / (last.t - first.t);
            let scale = 10f64.powi(CORPUS_DECIMALS as i32);
            (rate * scale).round() / scale
        }
        _ => NOMINAL_SAMPLE_RATE_HZ,
    }
}

pub fn save_corpus(runs: &[DriverRun], path: impl AsRef<Path>) -> Result<()> {
    write_corpus_file(runs, path, None)
}

/// Saves a corpus, optionally preceded by one `#` metadata comment line.
pub fn write_corpus_file(
    runs: &[DriverRun],
    path: impl AsRef<Path>,
    comment: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_corpus(runs, &mut out, comment)?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus<W: Write>(runs: &[DriverRun], mut out: W, comment: Option<&str>) -> Result<()> {
    for run in runs {
        run.validate()?;
    }
    if let Some(comment) = comment {
        writeln!(out, "# {comment}").map_err(|e| Error::io("<corpus>", e))?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(CORPUS_HEADER)?;
    let p = CORPUS_DECIMALS;
    for run in runs {
        for s in &run.samples {
            wtr.write_record([
                run.run_id.as_str(),
                run.label.as_str(),
                &format!("{:.p$}", s.t),
                &format!("{:.p$}", s.speed),
                &format!("{:.p$}", s.throttle),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<corpus>", e))?;
    Ok(())
}
