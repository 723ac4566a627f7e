//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's numeric code.

#![allow(dead_code)]

use drivestyle::level::StyleLevel;

/// Gaussian KDE by direct summation, written as `Σ φ((x − xᵢ)/λ) / (N λ)`.
pub fn kde_density(points: &[f64], bandwidth: f64, x: f64) -> f64 {
    let phi = |z: f64| (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    points
        .iter()
        .map(|&p| phi((x - p) / bandwidth))
        .sum::<f64>()
        / (points.len() as f64 * bandwidth)
}

/// Posterior of the first class by Bayes' rule.
pub fn bayes_posterior(like_a: f64, prior_a: f64, like_n: f64, prior_n: f64) -> (f64, f64) {
    let evidence = like_a * prior_a + like_n * prior_n;
    (like_a * prior_a / evidence, like_n * prior_n / evidence)
}

pub fn silverman(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Trapezoidal rule over `[lo, hi]` with `n` points.
pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    let mut sum = 0.5 * (f(lo) + f(hi));
    for i in 1..n - 1 {
        sum += f(lo + h * i as f64);
    }
    sum * h
}

/// The standard threshold table, written out interval by interval.
pub fn table_level(delta: f64) -> StyleLevel {
    if delta > 0.0 {
        let e = delta;
        if e > 0.5 {
            StyleLevel::Aggressive3
        } else if e > 0.2 && e <= 0.5 {
            StyleLevel::Aggressive2
        } else if e > 0.02 && e <= 0.2 {
            StyleLevel::Aggressive1
        } else {
            StyleLevel::ZeroPlus
        }
    } else {
        let e = -delta;
        if e > 0.5 {
            StyleLevel::Normal3
        } else if e > 0.1 && e <= 0.5 {
            StyleLevel::Normal2
        } else if e > 0.02 && e <= 0.1 {
            StyleLevel::Normal1
        } else {
            StyleLevel::ZeroMinus
        }
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Wraps raw feature values in a run sampled at the nominal rate.
pub fn make_run(
    id: &str,
    label: drivestyle::Label,
    speed: &[f64],
    throttle: &[f64],
) -> drivestyle::DriverRun {
    let samples = speed
        .iter()
        .zip(throttle)
        .enumerate()
        .map(|(i, (&s, &t))| drivestyle::TelemetrySample::new(i as f64 * 0.02, s, t).unwrap())
        .collect();
    drivestyle::DriverRun::new(id, label, samples, 50.0).unwrap()
}
