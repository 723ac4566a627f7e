//! Synthetic labeled driver runs with prescribed speed and throttle moments.
//!
//! Speed is drawn from a Gaussian truncated below at 0 and throttle from a
//! Gaussian truncated to `[0, 1]`. The location of each pre-truncation
//! Gaussian is solved so that the truncated distribution has the requested
//! mean; its scale is the square root of the requested variance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::classifier::read_json;
use crate::error::{Error, Result};
use crate::level::DriverClass;
use crate::telemetry::{DriverRun, Label, TelemetrySample, NOMINAL_SAMPLE_RATE_HZ};

pub const DEFAULT_RUN_LENGTH: usize = 5000;

/// Target statistics of one synthetic driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub label: DriverClass,
    /// km/h
    pub speed_mean: f64,
    /// (km/h)²
    pub speed_var: f64,
    pub throttle_mean: f64,
    pub throttle_var: f64,
    #[serde(default = "default_run_length")]
    pub run_length: usize,
    #[serde(default)]
    pub seed: u64,
    /// Lag-one autocorrelation of the underlying Gaussian; 0 gives i.i.d.
    /// samples.
    #[serde(default)]
    pub ar1: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
}

fn default_run_length() -> usize {
    DEFAULT_RUN_LENGTH
}

fn default_rate() -> f64 {
    NOMINAL_SAMPLE_RATE_HZ
}

impl ArchetypeSpec {
    pub fn new(
        label: DriverClass,
        speed_mean: f64,
        speed_var: f64,
        throttle_mean: f64,
        throttle_var: f64,
    ) -> Self {
        ArchetypeSpec {
            name: None,
            label,
            speed_mean,
            speed_var,
            throttle_mean,
            throttle_var,
            run_length: DEFAULT_RUN_LENGTH,
            seed: 0,
            ar1: 0.0,
            sample_rate_hz: NOMINAL_SAMPLE_RATE_HZ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::InvalidArchetype(format!(
                "{}: {m}",
                self.display_name()
            )))
        };
        if !(self.speed_mean.is_finite() && self.speed_mean > 0.0) {
            return bad("speed_mean must be positive");
        }
        if !(self.throttle_mean > 0.0 && self.throttle_mean < 1.0) {
            return bad("throttle_mean must lie in (0, 1)");
        }
        if !(self.speed_var.is_finite() && self.speed_var > 0.0)
            || !(self.throttle_var.is_finite() && self.throttle_var > 0.0)
        {
            return bad("variances must be positive");
        }
        if self.run_length == 0 {
            return bad("run_length must be positive");
        }
        if !(self.ar1 > -1.0 && self.ar1 < 1.0) {
            return bad("ar1 must lie in (-1, 1)");
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive");
        }
        Ok(())
    }

    fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.label.to_string())
    }
}

/// Per-run means and variances of the two recorded drivers (nine runs each).
/// Columns: speed mean, speed variance, throttle mean, throttle variance.
pub const REFERENCE_AGGRESSIVE: [[f64; 4]; 9] = [
    [56.849, 317.551, 0.566, 0.131],
    [61.334, 256.959, 0.610, 0.133],
    [61.928, 250.443, 0.645, 0.136],
    [61.336, 273.581, 0.625, 0.127],
    [64.451, 307.289, 0.599, 0.146],
    [64.241, 301.918, 0.688, 0.120],
    [63.146, 296.334, 0.612, 0.142],
    [61.932, 263.429, 0.649, 0.142],
    [64.147, 287.705, 0.608, 0.126],
];

pub const REFERENCE_NORMAL: [[f64; 4]; 9] = [
    [52.492, 152.317, 0.285, 0.099],
    [48.530, 173.298, 0.259, 0.063],
    [52.925, 129.773, 0.235, 0.071],
    [50.565, 137.977, 0.238, 0.059],
    [50.666, 106.973, 0.195, 0.056],
    [50.531, 117.186, 0.213, 0.064],
    [49.487, 154.639, 0.284, 0.057],
    [46.344, 115.193, 0.156, 0.030],
    [48.247, 95.392, 0.153, 0.037],
];

/// The 18 reference archetypes: nine aggressive, then nine normal.
pub fn reference_archetypes() -> Vec<ArchetypeSpec> {
    let bank = |label: DriverClass, rows: &[[f64; 4]; 9], prefix: &str, offset: u64| {
        rows.iter()
            .enumerate()
            .map(|(i, r)| ArchetypeSpec {
                name: Some(format!("{prefix}{:02}", i + 1)),
                seed: offset + i as u64,
                ..ArchetypeSpec::new(label, r[0], r[1], r[2], r[3])
            })
            .collect::<Vec<_>>()
    };
    let mut specs = bank(DriverClass::Aggressive, &REFERENCE_AGGRESSIVE, "agg", 0);
    specs.extend(bank(DriverClass::Normal, &REFERENCE_NORMAL, "norm", 9));
    specs
}

pub fn load_archetypes(path: impl AsRef<Path>) -> Result<Vec<ArchetypeSpec>> {
    let specs: Vec<ArchetypeSpec> = read_json(path.as_ref())?;
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

/// Gaussian with location `loc` and scale `scale` restricted to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub loc: f64,
    pub scale: f64,
    pub lo: f64,
    pub hi: f64,
}

fn std_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
    }
}

/// `Φ(b) − Φ(a)` computed from whichever tail keeps precision.
fn std_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    }
}

impl TruncatedNormal {
    pub fn new(loc: f64, scale: f64, lo: f64, hi: f64) -> Self {
        TruncatedNormal { loc, scale, lo, hi }
    }

    /// Mean of the truncated distribution.
    pub fn mean(&self) -> f64 {
        let a = (self.lo - self.loc) / self.scale;
        let b = (self.hi - self.loc) / self.scale;
        self.loc + self.scale * (std_pdf(a) - std_pdf(b)) / std_mass(a, b)
    }

    /// Solves for the location whose truncation has mean `target`.
    pub fn with_mean(target: f64, scale: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(target > lo && target < hi && scale > 0.0) {
            return Err(Error::InvalidArchetype(format!(
                "mean {target} not inside ({lo}, {hi})"
            )));
        }
        let mean_at = |loc: f64| TruncatedNormal::new(loc, scale, lo, hi).mean();
        // the truncated mean increases with the location
        let mut left = target - scale;
        while mean_at(left) > target {
            left -= scale;
        }
        let mut right = if hi.is_finite() {
            target + scale
        } else {
            target
        };
        while mean_at(right) < target {
            right += scale;
        }
        for _ in 0..200 {
            let mid = 0.5 * (left + right);
            if mid <= left || mid >= right {
                break;
            }
            if mean_at(mid) < target {
                left = mid;
            } else {
                right = mid;
            }
        }
        Ok(TruncatedNormal::new(0.5 * (left + right), scale, lo, hi))
    }
}

/// AR(1) Gaussian process mapped through a truncated normal by rejecting
/// innovations that leave `[lo, hi]`.
struct TruncatedAr1 {
    dist: TruncatedNormal,
    phi: f64,
    innovation_scale: f64,
    z: Option<f64>,
}

impl TruncatedAr1 {
    fn new(dist: TruncatedNormal, phi: f64) -> Self {
        TruncatedAr1 {
            dist,
            phi,
            innovation_scale: (1.0 - phi * phi).sqrt(),
            z: None,
        }
    }

    fn sample<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let d = self.dist;
        loop {
            let eps: f64 = rng.sample(StandardNormal);
            let z = match self.z {
                Some(prev) => self.phi * prev + self.innovation_scale * eps,
                None => eps,
            };
            let x = d.loc + d.scale * z;
            if x >= d.lo && x <= d.hi {
                self.z = Some(z);
                return x;
            }
        }
    }
}

pub fn generate_run(spec: &ArchetypeSpec) -> Result<DriverRun> {
    let run_id = spec.display_name();
    generate_run_with_id(spec, spec.seed, run_id)
}

fn generate_run_with_id(spec: &ArchetypeSpec, seed: u64, run_id: String) -> Result<DriverRun> {
    spec.validate()?;
    let speed =
        TruncatedNormal::with_mean(spec.speed_mean, spec.speed_var.sqrt(), 0.0, f64::INFINITY)?;
    let throttle =
        TruncatedNormal::with_mean(spec.throttle_mean, spec.throttle_var.sqrt(), 0.0, 1.0)?;
    let mut speed = TruncatedAr1::new(speed, spec.ar1);
    let mut throttle = TruncatedAr1::new(throttle, spec.ar1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / spec.sample_rate_hz;
    let samples = (0..spec.run_length)
        .map(|i| TelemetrySample {
            t: i as f64 * dt,
            speed: speed.sample(&mut rng),
            throttle: throttle.sample(&mut rng),
        })
        .collect();
    DriverRun::new(
        run_id,
        Label::from(spec.label),
        samples,
        spec.sample_rate_hz,
    )
}

/// `runs_per_archetype` runs for each spec, with per-run seeds drawn from
/// `master_seed`. Run ids are `<name>-rNN`.
pub fn generate_corpus(
    archetypes: &[ArchetypeSpec],
    runs_per_archetype: usize,
    master_seed: u64,
) -> Result<Vec<DriverRun>> {
    if archetypes.is_empty() || runs_per_archetype == 0 {
        return Err(Error::InvalidArchetype(
            "need at least one archetype and one run per archetype".into(),
        ));
    }
    let mut master = ChaCha8Rng::seed_from_u64(master_seed);
    let jobs: Vec<(usize, usize, u64)> = archetypes
        .iter()
        .enumerate()
        .flat_map(|(i, _)| (0..runs_per_archetype).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, master.next_u64()))
        .collect();
    jobs.into_par_iter()
        .map(|(i, j, seed)| {
            let spec = &archetypes[i];
            let base = spec
                .name
                .clone()
                .unwrap_or_else(|| format!("{}{:02}", spec.label, i + 1));
            generate_run_with_id(spec, seed, format!("{base}-r{:02}", j + 1))
        })
        .collect()
}
