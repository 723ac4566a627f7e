//! Per-feature Bayes posteriors, Euclidean-distance decisions and the
//! seven-level style scale.
//!
//! Each feature gets its own class-conditional KDE, so the joint density is
//! never formed and no speed/throttle covariance is estimated. For a sample
//! `x = (speed, throttle)` the classifier computes, per class `C`, the point
//! `(P(C | speed), P(C | throttle))` and its distance `d_C` from the origin.
//! The signed gap `Δ = d_agg − d_norm` is then binned by a [`ThresholdTable`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::{Bandwidth, KdeModel};
use crate::level::{Classified, DriverClass, StyleLevel};
use crate::telemetry::{extract_features, DriverRun, Feature, FeatureVector};

/// Version of the model JSON document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A value per driver class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPair<T> {
    pub aggressive: T,
    pub normal: T,
}

impl<T> ClassPair<T> {
    pub fn get(&self, class: DriverClass) -> &T {
        match class {
            DriverClass::Aggressive => &self.aggressive,
            DriverClass::Normal => &self.normal,
        }
    }

    pub fn swapped(self) -> ClassPair<T> {
        ClassPair {
            aggressive: self.normal,
            normal: self.aggressive,
        }
    }
}

/// Posterior probabilities `(P(aggressive | x), P(normal | x))`.
pub type Posterior = ClassPair<f64>;

/// One half-open interval of a threshold table.
///
/// The interval is `(lower, upper]`, or `[lower, upper]` when
/// `lower_inclusive` is set; `upper = None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelBin {
    pub lower: f64,
    #[serde(default)]
    pub lower_inclusive: bool,
    pub upper: Option<f64>,
    pub level: StyleLevel,
}

impl LevelBin {
    fn contains(&self, value: f64) -> bool {
        let above = if self.lower_inclusive {
            value >= self.lower
        } else {
            value > self.lower
        };
        above && self.upper.is_none_or(|u| value <= u)
    }
}

/// Maps the distance gap to a style level.
///
/// `aggressive` bins are looked up with `Δ` when `Δ > 0`, `normal` bins with
/// `|Δ|` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThresholdRepr", into = "ThresholdRepr")]
pub struct ThresholdTable {
    aggressive: Vec<LevelBin>,
    normal: Vec<LevelBin>,
}

#[derive(Serialize, Deserialize)]
struct ThresholdRepr {
    aggressive: Vec<LevelBin>,
    normal: Vec<LevelBin>,
}

impl TryFrom<ThresholdRepr> for ThresholdTable {
    type Error = Error;

    fn try_from(repr: ThresholdRepr) -> Result<Self> {
        ThresholdTable::new(repr.aggressive, repr.normal)
    }
}

impl From<ThresholdTable> for ThresholdRepr {
    fn from(table: ThresholdTable) -> Self {
        ThresholdRepr {
            aggressive: table.aggressive,
            normal: table.normal,
        }
    }
}

impl Default for ThresholdTable {
    /// The standard thresholds. The level-2 bins are deliberately
    /// asymmetric: `(0.2, 0.5]` on the aggressive side, `(0.1, 0.5]` on the
    /// normal side.
    fn default() -> Self {
        use StyleLevel::*;
        let bin = |lower, lower_inclusive, upper, level| LevelBin {
            lower,
            lower_inclusive,
            upper,
            level,
        };
        ThresholdTable {
            aggressive: vec![
                bin(0.0, false, Some(0.02), ZeroPlus),
                bin(0.02, false, Some(0.2), Aggressive1),
                bin(0.2, false, Some(0.5), Aggressive2),
                bin(0.5, false, None, Aggressive3),
            ],
            normal: vec![
                bin(0.0, true, Some(0.02), ZeroMinus),
                bin(0.02, false, Some(0.1), Normal1),
                bin(0.1, false, Some(0.5), Normal2),
                bin(0.5, false, None, Normal3),
            ],
        }
    }
}

impl ThresholdTable {
    /// Validates and builds a table. Bins may be given in any order.
    pub fn new(mut aggressive: Vec<LevelBin>, mut normal: Vec<LevelBin>) -> Result<Self> {
        validate_bins(
            &mut aggressive,
            "aggressive",
            false,
            DriverClass::Aggressive,
        )?;
        validate_bins(&mut normal, "normal", true, DriverClass::Normal)?;
        Ok(ThresholdTable { aggressive, normal })
    }

    pub fn aggressive_bins(&self) -> &[LevelBin] {
        &self.aggressive
    }

    pub fn normal_bins(&self) -> &[LevelBin] {
        &self.normal
    }

    /// Level for the distance gap `Δ = d_agg − d_norm`.
    pub fn level_for(&self, delta: f64) -> Result<StyleLevel> {
        if !delta.is_finite() {
            return Err(Error::NonFinite(delta));
        }
        let (bins, key) = if delta > 0.0 {
            (&self.aggressive, delta)
        } else {
            (&self.normal, -delta)
        };
        // validated tables cover [0, ∞)
        Ok(bins
            .iter()
            .find(|b| b.contains(key))
            .expect("threshold table covers every non-negative gap")
            .level)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

fn validate_bins(
    bins: &mut [LevelBin],
    side: &str,
    zero_inclusive: bool,
    class: DriverClass,
) -> Result<()> {
    let fail = |msg: String| Err(Error::InvalidThresholds(format!("{side} bins: {msg}")));
    if bins.is_empty() {
        return fail("empty".into());
    }
    if bins
        .iter()
        .any(|b| !b.lower.is_finite() || b.upper.is_some_and(|u| !u.is_finite() || u <= b.lower))
    {
        return fail("every bin needs a finite lower bound below its upper bound".into());
    }
    bins.sort_by(|a, b| a.lower.total_cmp(&b.lower));

    let first = &bins[0];
    if first.lower != 0.0 || (zero_inclusive && !first.lower_inclusive) {
        let want = if zero_inclusive { "[0" } else { "(0" };
        return fail(format!("must start at {want}"));
    }
    for pair in bins.windows(2) {
        match pair[0].upper {
            Some(u) if u == pair[1].lower && !pair[1].lower_inclusive => {}
            _ => {
                return fail(format!(
                    "bins starting at {} and {} are not adjacent lower-open intervals",
                    pair[0].lower, pair[1].lower
                ))
            }
        }
    }
    if bins.last().is_some_and(|b| b.upper.is_some()) {
        return fail("last bin must be unbounded".into());
    }
    if let Some(b) = bins.iter().find(|b| b.level.binary_class() != class) {
        return fail(format!("level {} belongs to the other class", b.level));
    }
    if bins
        .windows(2)
        .any(|p| p[1].level.value().abs() < p[0].level.value().abs())
    {
        return fail("level magnitudes must not decrease with the gap".into());
    }
    Ok(())
}

/// Per-sample output of the proposed recognizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleDecision {
    pub d_agg: f64,
    pub d_norm: f64,
    pub level: StyleLevel,
}

impl StyleDecision {
    pub fn delta(&self) -> f64 {
        self.d_agg - self.d_norm
    }
}

impl Classified for StyleDecision {
    fn level(&self) -> StyleLevel {
        self.level
    }
}

/// Training options.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub speed_bandwidth: Bandwidth,
    pub throttle_bandwidth: Bandwidth,
    pub thresholds: ThresholdTable,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            speed_bandwidth: Bandwidth::silverman_for(Feature::Speed),
            throttle_bandwidth: Bandwidth::silverman_for(Feature::Throttle),
            thresholds: ThresholdTable::default(),
        }
    }
}

impl TrainConfig {
    pub fn bandwidth(&self, feature: Feature) -> Bandwidth {
        match feature {
            Feature::Speed => self.speed_bandwidth,
            Feature::Throttle => self.throttle_bandwidth,
        }
    }
}

/// Everything needed to classify: four densities, priors and thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    speed: ClassPair<KdeModel>,
    throttle: ClassPair<KdeModel>,
    priors: ClassPair<f64>,
    thresholds: ThresholdTable,
}

impl ClassifierModel {
    /// Fits one density per class and feature on the pooled samples of all
    /// runs of that class. Priors are uniform over the two classes.
    pub fn train(runs: &[DriverRun], config: &TrainConfig) -> Result<Self> {
        let mut pooled: ClassPair<(Vec<f64>, Vec<f64>)> = ClassPair {
            aggressive: Default::default(),
            normal: Default::default(),
        };
        for run in runs {
            let class = run.class()?;
            let features = extract_features(run)?;
            let (speed, throttle) = match class {
                DriverClass::Aggressive => &mut pooled.aggressive,
                DriverClass::Normal => &mut pooled.normal,
            };
            speed.extend(features.iter().map(|f| f.speed));
            throttle.extend(features.iter().map(|f| f.throttle));
        }
        for class in DriverClass::ALL {
            if pooled.get(class).0.is_empty() {
                return Err(Error::MissingClass(class.as_str()));
            }
        }

        let fit = |values: &Vec<f64>, feature| KdeModel::fit(values, config.bandwidth(feature));
        let model = ClassifierModel {
            speed: ClassPair {
                aggressive: fit(&pooled.aggressive.0, Feature::Speed)?,
                normal: fit(&pooled.normal.0, Feature::Speed)?,
            },
            throttle: ClassPair {
                aggressive: fit(&pooled.aggressive.1, Feature::Throttle)?,
                normal: fit(&pooled.normal.1, Feature::Throttle)?,
            },
            priors: ClassPair {
                aggressive: 0.5,
                normal: 0.5,
            },
            thresholds: config.thresholds.clone(),
        };
        Ok(model)
    }

    /// Assembles a model from already fitted parts.
    pub fn from_parts(
        speed: ClassPair<KdeModel>,
        throttle: ClassPair<KdeModel>,
        priors: ClassPair<f64>,
        thresholds: ThresholdTable,
    ) -> Result<Self> {
        let model = ClassifierModel {
            speed,
            throttle,
            priors,
            thresholds,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.priors;
        if !(p.aggressive > 0.0 && p.normal > 0.0) || (p.aggressive + p.normal - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidModel(format!(
                "priors ({}, {}) must be positive and sum to 1",
                p.aggressive, p.normal
            )));
        }
        for feature in Feature::ALL {
            for class in DriverClass::ALL {
                let kde = self.kde(feature, class);
                if kde.is_empty()
                    || kde.bandwidth().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
                {
                    return Err(Error::InvalidModel(format!(
                        "{feature} density of class {class} is not fitted"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kde(&self, feature: Feature, class: DriverClass) -> &KdeModel {
        match feature {
            Feature::Speed => self.speed.get(class),
            Feature::Throttle => self.throttle.get(class),
        }
    }

    pub fn priors(&self) -> ClassPair<f64> {
        self.priors
    }

    pub fn thresholds(&self) -> &ThresholdTable {
        &self.thresholds
    }

    /// The same model with the two classes exchanged.
    pub fn with_classes_swapped(&self) -> ClassifierModel {
        ClassifierModel {
            speed: self.speed.clone().swapped(),
            throttle: self.throttle.clone().swapped(),
            priors: self.priors.swapped(),
            thresholds: self.thresholds.clone(),
        }
    }

    /// `P(C | x)` for both classes from one feature value.
    pub fn posterior(&self, feature: Feature, x: f64) -> Result<Posterior> {
        let kde = match feature {
            Feature::Speed => &self.speed,
            Feature::Throttle => &self.throttle,
        };
        let likelihoods = ClassPair {
            aggressive: kde.aggressive.density_at(x)?,
            normal: kde.normal.density_at(x)?,
        };
        if let Some(p) = bayes_posterior(likelihoods, self.priors) {
            return Ok(p);
        }

        // both likelihoods underflowed (or are subnormal): compare in log space
        let log_a = kde.aggressive.log_density_at(x)? + self.priors.aggressive.ln();
        let log_n = kde.normal.log_density_at(x)? + self.priors.normal.ln();
        let peak = log_a.max(log_n);
        let (ea, en) = ((log_a - peak).exp(), (log_n - peak).exp());
        Ok(Posterior {
            aggressive: ea / (ea + en),
            normal: en / (ea + en),
        })
    }

    /// Distances `(d_agg, d_norm)` of the per-class posterior points from the
    /// origin; each lies in `[0, √2]`.
    pub fn euclidean_distances(&self, x: FeatureVector) -> Result<(f64, f64)> {
        let speed = self.posterior(Feature::Speed, x.speed)?;
        let throttle = self.posterior(Feature::Throttle, x.throttle)?;
        Ok((
            posterior_distance(&[speed.aggressive, throttle.aggressive]),
            posterior_distance(&[speed.normal, throttle.normal]),
        ))
    }

    pub fn decide(&self, x: FeatureVector) -> Result<StyleDecision> {
        let (d_agg, d_norm) = self.euclidean_distances(x)?;
        let level = self.thresholds.level_for(d_agg - d_norm)?;
        Ok(StyleDecision {
            d_agg,
            d_norm,
            level,
        })
    }

    /// One decision per sample, in sample order.
    pub fn classify_run(&self, run: &DriverRun) -> Result<Vec<StyleDecision>> {
        let features = extract_features(run)?;
        self.classify_features(&features)
    }

    pub fn classify_features(&self, features: &[FeatureVector]) -> Result<Vec<StyleDecision>> {
        features.par_iter().map(|&x| self.decide(x)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>, metadata: ModelMetadata) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            metadata,
            model: self.clone(),
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, &doc).map_err(|e| Error::json(path, e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw: serde_json::Value = read_json(path)?;
        let found = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| {
                Error::InvalidModel(format!("{}: missing format_version", path.display()))
            })?;
        if found != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let doc: ModelDocument = serde_json::from_value(raw).map_err(|e| Error::json(path, e))?;
        doc.model.validate()?;
        Ok(doc.model)
    }
}

/// Provenance stored alongside a saved model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_corpus: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    metadata: ModelMetadata,
    #[serde(flatten)]
    model: ClassifierModel,
}

/// Bayes' rule for two classes. `None` when the evidence
/// `Σ p(x|C)·P(C)` is zero or subnormal.
pub fn bayes_posterior(likelihoods: ClassPair<f64>, priors: ClassPair<f64>) -> Option<Posterior> {
    let joint_a = likelihoods.aggressive * priors.aggressive;
    let joint_n = likelihoods.normal * priors.normal;
    let evidence = joint_a + joint_n;
    evidence.is_normal().then(|| Posterior {
        aggressive: joint_a / evidence,
        normal: joint_n / evidence,
    })
}

/// `‖(f(x_1), …, f(x_d))‖₂` for the per-feature posteriors of one class.
pub fn posterior_distance(posteriors: &[f64]) -> f64 {
    posteriors.iter().map(|p| p * p).sum::<f64>().sqrt()
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))
}
