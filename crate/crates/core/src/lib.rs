//! Driving-style recognition from vehicle speed and throttle telemetry.
//!
//! The proposed recognizer fits one Gaussian kernel density per feature and
//! per driver class, turns each feature value into a two-class posterior with
//! Bayes' rule, and compares the Euclidean norms of the per-class posterior
//! points to place every sample on a signed seven-level style scale
//! (`-3` strongly normal … `3` strongly aggressive). A Mamdani fuzzy inference
//! system over the same two inputs serves as the comparison baseline.
//!
//! Module map:
//!
//! * [`telemetry`]: samples, runs and the corpus CSV format.
//! * [`kde`]: one-dimensional Gaussian kernel density estimation.
//! * [`classifier`]: posteriors, distance decisions and the level thresholds.
//! * [`fuzzy`]: the fuzzy-logic baseline.
//! * [`datagen`]: synthetic driver runs with prescribed moments.
//! * [`eval`]: recognition rates, cross-validation and report rendering.
//! * [`cli`]: the `drivestyle` command line.

pub mod classifier;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod kde;
pub mod level;
pub mod telemetry;

pub use classifier::{ClassifierModel, Posterior, StyleDecision, ThresholdTable, TrainConfig};
pub use error::{Error, Result};
pub use fuzzy::{FisConfig, FuzzyDecision, FuzzySystem};
pub use kde::{Bandwidth, KdeModel};
pub use level::{Classified, DriverClass, StyleLevel};
pub use telemetry::{DriverRun, Feature, FeatureVector, Label, TelemetrySample};

/// Tool version stamped into every file the CLI writes.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
