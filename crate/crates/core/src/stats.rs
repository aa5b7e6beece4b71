// SPDX-License-Identifier: Apache-2.0

//! Goodness-of-fit helpers for the calibration harnesses.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// 5% asymptotic critical constant of the one-sample Kolmogorov-Smirnov test.
pub const KS_CRITICAL_5PCT: f64 = 1.36;

/// Kolmogorov-Smirnov distance between the sample and `U(0, 1)`.
/// Sorts `values` in place.
pub fn ks_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x.clamp(0.0, 1.0);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `1.36 / sqrt(n)`.
pub fn ks_critical_5pct(n: usize) -> f64 {
    KS_CRITICAL_5PCT / (n as f64).sqrt()
}

/// Pearson chi-square statistic and p-value of `observed` counts against
/// cell probabilities `expected` (cells with zero probability must be empty).
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        if p <= 0.0 {
            if o > 0 {
                return (f64::INFINITY, 0.0);
            }
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        dof += 1;
    }
    if dof < 2 {
        return (stat, 1.0);
    }
    let chi = ChiSquared::new((dof - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - chi.cdf(stat))
}

/// Normal-approximation 95% half-width of a binomial proportion.
pub fn binomial_95_halfwidth(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}
