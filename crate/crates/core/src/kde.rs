//! One-dimensional Gaussian kernel density estimation.
//!
//! For stored points `x_1 … x_N` and bandwidth `λ` the density at `x0` is
//!
//! ```text
//! f(x0) = 1 / (N · (2πλ²)^(d/2)) · Σ_i exp(−½ · ((x_i − x0) / λ)²),   d = 1
//! ```
//!
//! evaluated by exact summation over every stored point.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::Feature;

/// Dimension of the kernel. Features are modeled one at a time.
pub const KERNEL_DIM: i32 = 1;

/// Fraction of a feature's nominal range used as the bandwidth floor.
pub const BANDWIDTH_FLOOR_FRACTION: f64 = 1e-3;

/// How to choose the kernel width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule")]
pub enum Bandwidth {
    /// A fixed width in feature units.
    Fixed { value: f64 },
    /// Silverman's rule of thumb `1.06 · σ̂ · N^(−1/5)`, never below `floor`.
    Silverman { floor: f64 },
}

impl Bandwidth {
    pub fn fixed(value: f64) -> Self {
        Bandwidth::Fixed { value }
    }

    /// Silverman's rule with the default floor for `feature`.
    pub fn silverman_for(feature: Feature) -> Self {
        Bandwidth::Silverman {
            floor: BANDWIDTH_FLOOR_FRACTION * feature.nominal_range(),
        }
    }

    /// Resolves the rule to a concrete width for `values`.
    pub fn resolve(&self, values: &[f64]) -> Result<f64> {
        match *self {
            Bandwidth::Fixed { value } => check_bandwidth(value),
            Bandwidth::Silverman { floor } => {
                let floor = check_bandwidth(floor)?;
                if values.is_empty() {
                    return Err(Error::EmptyInput);
                }
                let sd = sample_std(values);
                let width = 1.06 * sd * (values.len() as f64).powf(-0.2);
                Ok(if width.is_finite() && width > floor {
                    width
                } else {
                    floor
                })
            }
        }
    }
}

fn check_bandwidth(value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidBandwidth(value))
    }
}

/// Sample standard deviation with the `N − 1` denominator; zero for fewer
/// than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// A fitted density for one feature of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KdeRepr", into = "KdeRepr")]
pub struct KdeModel {
    points: Vec<f64>,
    bandwidth: f64,
    /// `1 / (N · (2πλ²)^(d/2))`
    norm: f64,
}

#[derive(Serialize, Deserialize)]
struct KdeRepr {
    points: Vec<f64>,
    bandwidth: f64,
}

impl TryFrom<KdeRepr> for KdeModel {
    type Error = Error;

    fn try_from(repr: KdeRepr) -> Result<Self> {
        KdeModel::from_parts(repr.points, repr.bandwidth)
    }
}

impl From<KdeModel> for KdeRepr {
    fn from(model: KdeModel) -> Self {
        KdeRepr {
            points: model.points,
            bandwidth: model.bandwidth,
        }
    }
}

impl KdeModel {
    pub fn fit(values: &[f64], bandwidth: Bandwidth) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let width = bandwidth.resolve(values)?;
        KdeModel::from_parts(values.to_vec(), width)
    }

    /// Builds a model from stored points and a concrete bandwidth.
    pub fn from_parts(points: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(&bad) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        let bandwidth = check_bandwidth(bandwidth)?;
        let norm = 1.0
            / (points.len() as f64
                * (2.0 * bandwidth * bandwidth * PI).powf(KERNEL_DIM as f64 / 2.0));
        Ok(KdeModel {
            points,
            bandwidth,
            norm,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().sum::<f64>() / self.points.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.points.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.points
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Density at `x0`.
    ///
    /// Far outside the data (beyond ~38 bandwidths from every point) every
    /// kernel term underflows and the result is `0.0`; use
    /// [`KdeModel::log_density_at`] there.
    pub fn density_at(&self, x0: f64) -> Result<f64> {
        if !x0.is_finite() {
            return Err(Error::NonFinite(x0));
        }
        let inv = 1.0 / self.bandwidth;
        let sum: f64 = self
            .points
            .iter()
            .map(|&xi| {
                let z = (xi - x0) * inv;
                (-0.5 * z * z).exp()
            })
            .sum();
        Ok(self.norm * sum)
    }

    /// Natural log of the density, finite for every finite `x0`.
    pub fn log_density_at(&self, x0: f64) -> Result<f64> {
        if !x0.is_finite() {
            return Err(Error::NonFinite(x0));
        }
        let inv = 1.0 / self.bandwidth;
        let exponent = |xi: f64| {
            let z = (xi - x0) * inv;
            -0.5 * z * z
        };
        let peak = self
            .points
            .iter()
            .map(|&xi| exponent(xi))
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = self
            .points
            .iter()
            .map(|&xi| (exponent(xi) - peak).exp())
            .sum();
        Ok(self.norm.ln() + peak + sum.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_unit_bandwidth() {
        let kde = KdeModel::fit(&[5.0], Bandwidth::fixed(1.0)).unwrap();
        assert_eq!(kde.len(), 1);
        assert_eq!(kde.bandwidth(), 1.0);
        let peak = kde.density_at(5.0).unwrap();
        assert!((peak - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_points_midway() {
        let kde = KdeModel::fit(&[0.0, 2.0], Bandwidth::fixed(1.0)).unwrap();
        let expected = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((kde.density_at(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.24197).abs() < 1e-5);
    }

    #[test]
    fn silverman_formula() {
        // sample std exactly 10: alternating ±a around 0 with a chosen so that
        // Σx²/(N−1) = 100
        let n = 100;
        let a = (100.0 * (n - 1) as f64 / n as f64).sqrt();
        let values: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { a } else { -a }).collect();
        assert!((sample_std(&values) - 10.0).abs() < 1e-12);
        let kde = KdeModel::fit(&values, Bandwidth::silverman_for(Feature::Speed)).unwrap();
        // 1.06 · 10 · 100^(−1/5), evaluated by hand: 100^(−0.2) = 10^(−0.4)
        let expected = 10.6 * 10f64.powf(-0.4);
        assert!((kde.bandwidth() - expected).abs() < 1e-12);
        assert!((kde.bandwidth() - 4.22).abs() < 1e-2);
    }

    #[test]
    fn zero_variance_falls_back_to_floor() {
        let speed = KdeModel::fit(&[40.0; 10], Bandwidth::silverman_for(Feature::Speed)).unwrap();
        assert!((speed.bandwidth() - 0.12).abs() < 1e-15);
        let throttle =
            KdeModel::fit(&[0.4; 10], Bandwidth::silverman_for(Feature::Throttle)).unwrap();
        assert!((throttle.bandwidth() - 0.001).abs() < 1e-15);
        // a single point has no sample variance either
        let single = KdeModel::fit(&[0.4], Bandwidth::silverman_for(Feature::Throttle)).unwrap();
        assert_eq!(single.bandwidth(), throttle.bandwidth());
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            KdeModel::fit(&[], Bandwidth::fixed(1.0)),
            Err(Error::EmptyInput)
        ));
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                KdeModel::fit(&[1.0], Bandwidth::fixed(bad)),
                Err(Error::InvalidBandwidth(_))
            ));
        }
        assert!(KdeModel::fit(&[f64::NAN], Bandwidth::fixed(1.0)).is_err());
        assert!(KdeModel::fit(&[1.0, 2.0], Bandwidth::Silverman { floor: 0.0 }).is_err());
    }

    #[test]
    fn density_rejects_non_finite() {
        let kde = KdeModel::fit(&[0.0], Bandwidth::fixed(1.0)).unwrap();
        assert!(kde.density_at(f64::NAN).is_err());
        assert!(kde.log_density_at(f64::INFINITY).is_err());
    }

    #[test]
    fn log_density_agrees_and_stays_finite() {
        let kde = KdeModel::fit(&[0.0, 1.0, 3.5], Bandwidth::fixed(0.7)).unwrap();
        for x in [-2.0, 0.0, 0.3, 2.0, 5.0] {
            let d = kde.density_at(x).unwrap();
            let ld = kde.log_density_at(x).unwrap();
            assert!((ld.exp() - d).abs() <= 1e-14 * d, "{x}");
        }
        // every kernel term underflows here, the log stays exact
        assert_eq!(kde.density_at(1000.0).unwrap(), 0.0);
        let ld = kde.log_density_at(1000.0).unwrap();
        let expected = (1.0 / (3.0 * (2.0 * PI * 0.49f64).sqrt())).ln()
            - 0.5 * ((1000.0 - 3.5) / 0.7f64).powi(2);
        assert!((ld - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn wider_kernel_lowers_peak() {
        let mut last = f64::INFINITY;
        for width in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let d = KdeModel::fit(&[3.0], Bandwidth::fixed(width))
                .unwrap()
                .density_at(3.0)
                .unwrap();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn json_shape_and_validation() {
        let kde = KdeModel::fit(&[1.0, 2.0], Bandwidth::fixed(0.5)).unwrap();
        let json = serde_json::to_string(&kde).unwrap();
        assert_eq!(json, r#"{"points":[1.0,2.0],"bandwidth":0.5}"#);
        let back: KdeModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kde);
        assert!(serde_json::from_str::<KdeModel>(r#"{"points":[],"bandwidth":0.5}"#).is_err());
        assert!(serde_json::from_str::<KdeModel>(r#"{"points":[1.0],"bandwidth":-1}"#).is_err());
    }
}
