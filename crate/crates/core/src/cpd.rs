// SPDX-License-Identifier: Apache-2.0

//! Conformal predictive distributions.
//!
//! The conservative map sends a candidate label to the target assigned to
//! its score by the assignment stream. The randomized map then draws a point
//! inside that target's Laguerre cell, which makes the transported test
//! score exactly spherical-uniform under exchangeability. In one dimension
//! the same construction is the Dempster-Hill rule.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::PartitionArtifact;
use crate::rng::{stream_rng, Stream};
use crate::scalar::{norm, sub, Scalar};
use crate::semidiscrete::CellLaw;
use crate::stats::{ks_critical_5pct, ks_uniform};

/// How a candidate label becomes a score.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreMap<T> {
    /// `y - yhat(x)`; the rank map is then monotone in `y`.
    Residual,
    /// `A (y - yhat(x))`; monotone only in the metric induced by `A`.
    Affine(Vec<Vec<T>>),
}

impl<T: Scalar> ScoreMap<T> {
    pub fn apply(&self, y: &[T], prediction: &[T]) -> Result<Vec<T>> {
        if y.len() != prediction.len() {
            return Err(Error::Shape(format!(
                "candidate of dimension {} against prediction of dimension {}",
                y.len(),
                prediction.len()
            )));
        }
        let r = sub(y, prediction);
        match self {
            ScoreMap::Residual => Ok(r),
            ScoreMap::Affine(a) => {
                if a.iter().any(|row| row.len() != r.len()) {
                    return Err(Error::Shape(
                        "score matrix does not match label dimension".into(),
                    ));
                }
                Ok(a.iter().map(|row| crate::scalar::dot(row, &r)).collect())
            }
        }
    }

    pub fn is_residual(&self) -> bool {
        matches!(self, ScoreMap::Residual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdEvaluation<T> {
    pub candidate: Vec<T>,
    pub score: Vec<T>,
    pub assigned_index: usize,
    pub vector_rank: Vec<T>,
    pub norm_rank: T,
    pub randomized_point: Option<Vec<T>>,
    pub randomized_norm: Option<T>,
    /// `false` for non-residual scores: monotonicity in `y` is not guaranteed.
    pub monotone: bool,
}

/// Conservative evaluation with the residual score.
pub fn cpd_evaluate<T: Scalar>(
    y: &[T],
    prediction: &[T],
    artifact: &PartitionArtifact<T>,
) -> Result<CpdEvaluation<T>> {
    cpd_evaluate_with(y, prediction, &ScoreMap::Residual, artifact)
}

pub fn cpd_evaluate_with<T: Scalar>(
    y: &[T],
    prediction: &[T],
    score_map: &ScoreMap<T>,
    artifact: &PartitionArtifact<T>,
) -> Result<CpdEvaluation<T>> {
    let score = score_map.apply(y, prediction)?;
    let (k, psi) = artifact.assign(&score)?;
    Ok(CpdEvaluation {
        candidate: y.to_vec(),
        vector_rank: psi.to_vec(),
        norm_rank: artifact.target_norms[k],
        score,
        assigned_index: k,
        randomized_point: None,
        randomized_norm: None,
        monotone: score_map.is_residual(),
    })
}

/// Randomized evaluation: the conservative rank plus a draw inside the
/// assigned cell.
pub fn cpd_evaluate_randomized<T: Scalar, L: CellLaw<T>, R: Rng + ?Sized>(
    y: &[T],
    prediction: &[T],
    artifact: &PartitionArtifact<T>,
    cells: &L,
    rng: &mut R,
) -> Result<CpdEvaluation<T>> {
    let mut eval = cpd_evaluate(y, prediction, artifact)?;
    let u = cells.sample_cell(eval.assigned_index, rng)?;
    eval.randomized_norm = Some(norm(&u));
    eval.randomized_point = Some(u);
    Ok(eval)
}

/// Interval-valued predictive CDF of the Dempster-Hill rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DempsterHillInterval {
    pub lower: f64,
    pub upper: f64,
    pub randomized_value: Option<f64>,
}

/// `Q(y, tau) = (#{y_i < y} + tau #{y_i = y}) / (n + 1)` over the augmented
/// sample `{y_1..y_n, y}`; the interval is `[Q(y, 0), Q(y, 1)]`.
pub fn dempster_hill(y: f64, sample: &[f64], tau: Option<f64>) -> Result<DempsterHillInterval> {
    if !y.is_finite() || sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite value".into()));
    }
    if let Some(t) = tau {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Input(format!("tau must lie in [0, 1], got {t}")));
        }
    }
    let total = (sample.len() + 1) as f64;
    let below = sample.iter().filter(|&&x| x < y).count() as f64;
    let tied = 1.0 + sample.iter().filter(|&&x| x == y).count() as f64;
    Ok(DempsterHillInterval {
        lower: below / total,
        upper: (below + tied) / total,
        randomized_value: tau.map(|t| (below + t * tied) / total),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DhGenerator {
    /// Standard normal draws.
    Normal,
    /// Fair coin on `{0, 1}`.
    Coin,
}

impl DhGenerator {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            DhGenerator::Normal => rng.sample(StandardNormal),
            DhGenerator::Coin => f64::from(u8::from(rng.random::<bool>())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauMode {
    Random,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub reps: usize,
    pub statistic: f64,
    pub critical_5pct: f64,
    pub passed: bool,
}

impl KsReport {
    pub fn from_values(values: &mut [f64]) -> Self {
        let statistic = ks_uniform(values);
        let critical_5pct = ks_critical_5pct(values.len());
        Self {
            reps: values.len(),
            statistic,
            critical_5pct,
            passed: statistic < critical_5pct,
        }
    }
}

/// Randomized Dempster-Hill values of exchangeable replications, tested
/// against `U(0, 1)`.
pub fn dh_pit_suite(
    generator: DhGenerator,
    n: usize,
    reps: usize,
    tau: TauMode,
    seed: u64,
) -> Result<KsReport> {
    let mut values = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut data_rng = stream_rng(seed, Stream::ScenarioData, rep as u64);
        let mut tau_rng = stream_rng(seed, Stream::Tau, rep as u64);
        let sample: Vec<f64> = (0..n).map(|_| generator.draw(&mut data_rng)).collect();
        let y = generator.draw(&mut data_rng);
        let t = match tau {
            TauMode::Random => tau_rng.random::<f64>(),
            TauMode::Fixed(t) => t,
        };
        let q = dempster_hill(y, &sample, Some(t))?;
        values.push(q.randomized_value.expect("tau supplied"));
    }
    Ok(KsReport::from_values(&mut values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridPlan};
    use crate::partition::fit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dempster_hill_cases() {
        let s = [1.0, 2.0, 3.0, 4.0];
        let q = dempster_hill(2.5, &s, None).unwrap();
        assert_eq!((q.lower, q.upper), (2.0 / 5.0, 3.0 / 5.0));
        let q = dempster_hill(3.0, &s, Some(0.5)).unwrap();
        assert_eq!((q.lower, q.upper), (2.0 / 5.0, 4.0 / 5.0));
        assert_eq!(q.randomized_value, Some(3.0 / 5.0));
        let q = dempster_hill(0.0, &s, None).unwrap();
        assert_eq!((q.lower, q.upper), (0.0, 1.0 / 5.0));
        let q = dempster_hill(9.0, &s, None).unwrap();
        assert_eq!((q.lower, q.upper), (4.0 / 5.0, 1.0));
        // Merged block of three tied sample points.
        let q = dempster_hill(2.0, &[2.0, 2.0, 2.0, 5.0], Some(1.0)).unwrap();
        assert_eq!(
            (q.lower, q.upper, q.randomized_value),
            (0.0, 4.0 / 5.0, Some(4.0 / 5.0))
        );
        assert!(dempster_hill(f64::NAN, &s, None).is_err());
        assert!(dempster_hill(1.0, &s, Some(1.5)).is_err());
    }

    #[test]
    fn gaps_partition_unit_interval() {
        let s = [0.3, -1.2, 4.0, 2.2, 0.9];
        let mut sorted = s.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut probes = vec![sorted[0] - 1.0];
        probes.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        probes.push(sorted[4] + 1.0);
        let mut prev_upper = 0.0;
        for y in probes {
            let q = dempster_hill(y, &s, None).unwrap();
            assert_eq!(q.lower, prev_upper);
            assert!((q.upper - q.lower - 1.0 / 6.0).abs() < 1e-15);
            prev_upper = q.upper;
        }
        assert!((prev_upper - 1.0).abs() < 1e-15);
    }

    #[test]
    fn randomization_handles_ties() {
        let normal = dh_pit_suite(DhGenerator::Normal, 9, 2000, TauMode::Random, 1).unwrap();
        assert!(normal.passed, "{normal:?}");
        let coin = dh_pit_suite(DhGenerator::Coin, 9, 2000, TauMode::Random, 2).unwrap();
        assert!(coin.passed, "{coin:?}");
        let fixed = dh_pit_suite(DhGenerator::Coin, 9, 2000, TauMode::Fixed(0.0), 2).unwrap();
        assert!(!fixed.passed, "{fixed:?}");
    }

    fn artifact() -> PartitionArtifact<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let grid = build_grid(&GridPlan::new(5, 8, 4, 0).unwrap(), 2).unwrap();
        let scores: Vec<Vec<f64>> = (0..43)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                vec![a, 0.5 * a + b]
            })
            .collect();
        fit(&scores, &grid).unwrap()
    }

    #[test]
    fn zero_score_and_consistency() {
        let a = artifact();
        let yhat = [0.4, -0.3];
        let e = cpd_evaluate(&yhat, &yhat, &a).unwrap();
        assert_eq!(e.score, vec![0.0, 0.0]);
        assert_eq!(e.vector_rank, a.assign(&[0.0, 0.0]).unwrap().1.to_vec());
        assert!((e.norm_rank - norm(&e.vector_rank)).abs() < 1e-12);

        let set = crate::conformal::predict_set(&a, 0.6, &yhat).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let y = [
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
            ];
            let e = cpd_evaluate(&y, &yhat, &a).unwrap();
            assert_eq!(e.norm_rank <= 0.6 + 1e-12, set.contains(&y).unwrap());
        }
    }

    #[test]
    fn monotone_for_residual_and_metric_monotone_for_affine() {
        let a = artifact();
        let yhat = [0.1, 0.2];
        let m = vec![vec![2.0, 0.5], vec![-0.3, 1.0]];
        let affine = ScoreMap::Affine(m.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..2000 {
            let y = [
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
            ];
            let y2 = [
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
            ];
            let t1 = cpd_evaluate(&y, &yhat, &a).unwrap().vector_rank;
            let t2 = cpd_evaluate(&y2, &yhat, &a).unwrap().vector_rank;
            let ip = (t1[0] - t2[0]) * (y[0] - y2[0]) + (t1[1] - t2[1]) * (y[1] - y2[1]);
            assert!(ip >= -1e-9);

            let e1 = cpd_evaluate_with(&y, &yhat, &affine, &a).unwrap();
            let e2 = cpd_evaluate_with(&y2, &yhat, &affine, &a).unwrap();
            assert!(!e1.monotone);
            let dy = [y[0] - y2[0], y[1] - y2[1]];
            let ady = [
                m[0][0] * dy[0] + m[0][1] * dy[1],
                m[1][0] * dy[0] + m[1][1] * dy[1],
            ];
            let ip = (e1.vector_rank[0] - e2.vector_rank[0]) * ady[0]
                + (e1.vector_rank[1] - e2.vector_rank[1]) * ady[1];
            assert!(ip >= -1e-9);
        }
    }

    #[test]
    fn one_dimensional_rank_is_center_outward() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let grid = build_grid(&GridPlan::new(10, 2, 1, 0).unwrap(), 1).unwrap();
        let scores: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let a = fit(&scores, &grid).unwrap();
        let ranks: Vec<f64> = (0..1000)
            .map(|i| -4.0 + 8.0 * i as f64 / 999.0)
            .map(|y| cpd_evaluate(&[y], &[0.0], &a).unwrap().norm_rank)
            .collect();
        let lowest = ranks
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(ranks[..=lowest].windows(2).all(|w| w[1] <= w[0]));
        assert!(ranks[lowest..].windows(2).all(|w| w[1] >= w[0]));
        // Signed transport is non-decreasing.
        let signed: Vec<f64> = (0..1000)
            .map(|i| -4.0 + 8.0 * i as f64 / 999.0)
            .map(|y| cpd_evaluate(&[y], &[0.0], &a).unwrap().vector_rank[0])
            .collect();
        assert!(signed.windows(2).all(|w| w[1] >= w[0]));
    }
}
