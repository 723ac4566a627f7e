//! Mamdani fuzzy inference baseline.
//!
//! Two inputs (speed, throttle) with terms L/M/H each, one output on
//! `[-3, 3]` with terms LN/N/M/A/HA, nine min-AND rules, max aggregation and
//! centroid defuzzification on a uniform grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::read_json;
use crate::error::{Error, Result};
use crate::level::{Classified, StyleLevel};
use crate::telemetry::{extract_features, DriverRun, FeatureVector};

/// Piecewise-linear membership function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "shape", content = "points")]
pub enum MembershipFunction {
    /// `(a, b, c)`: 0 at `a`, 1 at `b`, 0 at `c`. `a == b` or `b == c` gives
    /// a shoulder.
    Triangular([f64; 3]),
    /// `(a, b, c, d)`: rises on `[a, b]`, 1 on `[b, c]`, falls on `[c, d]`.
    Trapezoidal([f64; 4]),
}

impl MembershipFunction {
    fn corners(&self) -> [f64; 4] {
        match *self {
            MembershipFunction::Triangular([a, b, c]) => [a, b, b, c],
            MembershipFunction::Trapezoidal(p) => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.corners();
        if p.iter().any(|v| !v.is_finite()) || p.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidFis(format!(
                "breakpoints {p:?} must be finite and non-decreasing"
            )));
        }
        Ok(())
    }

    pub fn degree(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.corners();
        if x < a || x > d {
            0.0
        } else if x >= b && x <= c {
            1.0
        } else if x < b {
            (x - a) / (b - a)
        } else {
            (d - x) / (d - c)
        }
    }

    /// Midpoint of the core, where the degree is 1.
    pub fn core(&self) -> f64 {
        let [_, b, c, _] = self.corners();
        0.5 * (b + c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputTerm {
    L,
    M,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputTerm {
    LN,
    N,
    M,
    A,
    HA,
}

impl OutputTerm {
    pub const ALL: [OutputTerm; 5] = [
        OutputTerm::LN,
        OutputTerm::N,
        OutputTerm::M,
        OutputTerm::A,
        OutputTerm::HA,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputTerms {
    #[serde(rename = "L")]
    pub low: MembershipFunction,
    #[serde(rename = "M")]
    pub middle: MembershipFunction,
    #[serde(rename = "H")]
    pub high: MembershipFunction,
}

impl InputTerms {
    pub fn get(&self, term: InputTerm) -> &MembershipFunction {
        match term {
            InputTerm::L => &self.low,
            InputTerm::M => &self.middle,
            InputTerm::H => &self.high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputVariable {
    pub min: f64,
    pub max: f64,
    pub terms: InputTerms,
}

impl InputVariable {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidFis(format!("{name}: bad universe")));
        }
        for t in [self.terms.low, self.terms.middle, self.terms.high] {
            t.validate()?;
        }
        Ok(())
    }

    fn clamp(&self, name: &str, x: f64) -> f64 {
        let c = x.clamp(self.min, self.max);
        if c != x {
            log::debug!(
                "{name} {x} clamped to the universe [{}, {}]",
                self.min,
                self.max
            );
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputTerms {
    #[serde(rename = "LN")]
    pub low_normal: MembershipFunction,
    #[serde(rename = "N")]
    pub normal: MembershipFunction,
    #[serde(rename = "M")]
    pub middle: MembershipFunction,
    #[serde(rename = "A")]
    pub aggressive: MembershipFunction,
    #[serde(rename = "HA")]
    pub high_aggressive: MembershipFunction,
}

impl OutputTerms {
    pub fn get(&self, term: OutputTerm) -> &MembershipFunction {
        match term {
            OutputTerm::LN => &self.low_normal,
            OutputTerm::N => &self.normal,
            OutputTerm::M => &self.middle,
            OutputTerm::A => &self.aggressive,
            OutputTerm::HA => &self.high_aggressive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputVariable {
    pub min: f64,
    pub max: f64,
    pub terms: OutputTerms,
}

/// `speed_term AND throttle_term → output`, weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub speed: InputTerm,
    pub throttle: InputTerm,
    pub output: OutputTerm,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

/// The rule table of the baseline recognizer.
pub fn standard_rules() -> Vec<FuzzyRule> {
    use InputTerm::*;
    let rule = |speed, throttle, output| FuzzyRule {
        speed,
        throttle,
        output,
        weight: 1.0,
    };
    vec![
        rule(L, L, OutputTerm::LN),
        rule(L, M, OutputTerm::M),
        rule(L, H, OutputTerm::HA),
        rule(M, L, OutputTerm::N),
        rule(M, M, OutputTerm::M),
        rule(M, H, OutputTerm::A),
        rule(H, L, OutputTerm::HA),
        rule(H, M, OutputTerm::A),
        rule(H, H, OutputTerm::HA),
    ]
}

/// Configuration of the inference system, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisConfig {
    pub speed: InputVariable,
    pub throttle: InputVariable,
    pub output: OutputVariable,
    pub rules: Vec<FuzzyRule>,
    /// Number of grid points for centroid defuzzification.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Permit a rule table other than [`standard_rules`].
    #[serde(default)]
    pub allow_custom_rules: bool,
}

fn default_resolution() -> usize {
    1001
}

impl Default for FisConfig {
    fn default() -> Self {
        use MembershipFunction::Triangular as Tri;
        FisConfig {
            speed: InputVariable {
                min: 0.0,
                max: 120.0,
                terms: InputTerms {
                    low: Tri([0.0, 0.0, 45.0]),
                    middle: Tri([25.0, 50.0, 75.0]),
                    high: Tri([55.0, 120.0, 120.0]),
                },
            },
            throttle: InputVariable {
                min: 0.0,
                max: 1.0,
                terms: InputTerms {
                    low: Tri([0.0, 0.0, 0.4]),
                    middle: Tri([0.2, 0.5, 0.8]),
                    high: Tri([0.6, 1.0, 1.0]),
                },
            },
            output: OutputVariable {
                min: -3.0,
                max: 3.0,
                terms: OutputTerms {
                    low_normal: Tri([-3.0, -3.0, -1.5]),
                    normal: Tri([-3.0, -1.5, 0.0]),
                    middle: Tri([-1.5, 0.0, 1.5]),
                    aggressive: Tri([0.0, 1.5, 3.0]),
                    high_aggressive: Tri([1.5, 3.0, 3.0]),
                },
            },
            rules: standard_rules(),
            resolution: default_resolution(),
            allow_custom_rules: false,
        }
    }
}

impl FisConfig {
    pub fn validate(&self) -> Result<()> {
        self.speed.validate("speed")?;
        self.throttle.validate("throttle")?;
        let out = &self.output;
        if !(out.min.is_finite() && out.max.is_finite() && out.min < out.max) {
            return Err(Error::InvalidFis("output: bad universe".into()));
        }
        for term in OutputTerm::ALL {
            out.terms.get(term).validate()?;
        }
        if self.resolution < 2 {
            return Err(Error::InvalidFis("resolution must be at least 2".into()));
        }
        if self
            .rules
            .iter()
            .any(|r| !(r.weight.is_finite() && (0.0..=1.0).contains(&r.weight)))
        {
            return Err(Error::InvalidFis("rule weights must lie in [0, 1]".into()));
        }
        if !self.allow_custom_rules && self.rules != standard_rules() {
            return Err(Error::InvalidFis(
                "rule table differs from the standard nine rules; set allow_custom_rules to override"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let config: FisConfig = read_json(path.as_ref())?;
        config.validate()?;
        Ok(config)
    }
}

/// Crisp output and level of one fuzzy inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyDecision {
    pub crisp: f64,
    pub level: StyleLevel,
}

impl Classified for FuzzyDecision {
    fn level(&self) -> StyleLevel {
        self.level
    }
}

/// A validated, ready-to-run inference system.
#[derive(Debug, Clone)]
pub struct FuzzySystem {
    config: FisConfig,
    grid: Vec<f64>,
    /// Output term memberships sampled on `grid`, one row per term.
    term_grid: [Vec<f64>; 5],
}

impl Default for FuzzySystem {
    fn default() -> Self {
        FuzzySystem::new(FisConfig::default()).expect("default configuration is valid")
    }
}

impl FuzzySystem {
    pub fn new(config: FisConfig) -> Result<Self> {
        config.validate()?;
        let n = config.resolution;
        let (lo, hi) = (config.output.min, config.output.max);
        let step = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        let term_grid = OutputTerm::ALL.map(|term| {
            let mf = config.output.terms.get(term);
            grid.iter().map(|&y| mf.degree(y)).collect()
        });
        Ok(FuzzySystem {
            config,
            grid,
            term_grid,
        })
    }

    pub fn config(&self) -> &FisConfig {
        &self.config
    }

    /// Firing strength aggregated per output term (max over rules).
    pub fn activations(&self, speed: f64, throttle: f64) -> [f64; 5] {
        let speed = self.config.speed.clamp("speed", speed);
        let throttle = self.config.throttle.clamp("throttle", throttle);
        let mut act = [0.0f64; 5];
        for rule in &self.config.rules {
            let s = self.config.speed.terms.get(rule.speed).degree(speed);
            let t = self
                .config
                .throttle
                .terms
                .get(rule.throttle)
                .degree(throttle);
            let fire = rule.weight * s.min(t);
            let slot = &mut act[rule.output as usize];
            *slot = slot.max(fire);
        }
        act
    }

    /// Crisp style value in the output universe.
    pub fn infer(&self, speed: f64, throttle: f64) -> f64 {
        let act = self.activations(speed, throttle);
        let last = self.grid.len() - 1;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &y) in self.grid.iter().enumerate() {
            // trapezoid weights
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            let mu = w * act
                .iter()
                .zip(&self.term_grid)
                .map(|(&a, g)| a.min(g[i]))
                .fold(0.0, f64::max);
            num += y * mu;
            den += mu;
        }
        if den > 0.0 {
            num / den
        } else {
            log::warn!("no fuzzy rule fired at speed {speed}, throttle {throttle}");
            0.5 * (self.config.output.min + self.config.output.max)
        }
    }

    pub fn decide(&self, x: FeatureVector) -> FuzzyDecision {
        let crisp = self.infer(x.speed, x.throttle);
        FuzzyDecision {
            crisp,
            level: fuzzy_level(crisp),
        }
    }

    pub fn classify_run(&self, run: &DriverRun) -> Result<Vec<FuzzyDecision>> {
        use rayon::prelude::*;
        let features = extract_features(run)?;
        Ok(features.par_iter().map(|&x| self.decide(x)).collect())
    }
}

/// Rounds a crisp output to the nearest level (ties away from zero); a zero
/// level keeps the sign of the crisp value, with exactly 0 counted normal.
pub fn fuzzy_level(crisp: f64) -> StyleLevel {
    let rounded = crisp.round().clamp(-3.0, 3.0) as i8;
    StyleLevel::from_value(rounded, crisp > 0.0).expect("rounded value lies in -3..=3")
}
