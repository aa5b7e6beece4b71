// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo harness for coverage and discrete PIT checks.
//!
//! Every replication draws a fresh calibration set and a test score from
//! the scenario, so the reported frequencies estimate the marginal
//! probabilities over calibration and test randomness together.

use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::conformal_radius;
use crate::error::{Error, Result};
use crate::grid::{build_grid, plan_decomposition, GridPlan, SphericalGrid};
use crate::partition::{fit, full_assignment};
use crate::rng::{stream_rng, stream_seed, Stream};
use crate::stats::{binomial_95_halfwidth, chi_square_gof};

/// Score generators. Scenario definitions are versioned with the crate:
/// changing one changes every regenerated report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// `N(0, [[1, 0.8], [0.8, 1]])`.
    Gaussian,
    /// `R_45 (Z_1, 15 Z_2 + 24 (Z_1^2 - 1))` with `Z` standard normal.
    Banana,
    /// `U(0, 1)` in one dimension.
    Uniform1d,
    /// `N(0, 1)` in one dimension.
    Normal1d,
}

impl Scenario {
    pub fn dim(self) -> usize {
        match self {
            Scenario::Gaussian | Scenario::Banana => 2,
            Scenario::Uniform1d | Scenario::Normal1d => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Gaussian => "gaussian",
            Scenario::Banana => "banana",
            Scenario::Uniform1d => "uniform1d",
            Scenario::Normal1d => "normal1d",
        }
    }

    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Vec<f64> {
        match self {
            Scenario::Gaussian => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                // Cholesky factor of [[1, 0.8], [0.8, 1]].
                vec![a, 0.8 * a + 0.6 * b]
            }
            Scenario::Banana => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x = z1;
                let y = 15.0 * z2 + 24.0 * (z1 * z1 - 1.0);
                let c = std::f64::consts::FRAC_1_SQRT_2;
                vec![c * x - c * y, c * x + c * y]
            }
            Scenario::Uniform1d => vec![rng.random::<f64>()],
            Scenario::Normal1d => vec![rng.sample(StandardNormal)],
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Scenario::Gaussian),
            "banana" => Ok(Scenario::Banana),
            "uniform1d" => Ok(Scenario::Uniform1d),
            "normal1d" => Ok(Scenario::Normal1d),
            other => Err(Error::Config(format!(
                "unknown scenario `{other}` (expected gaussian, banana, uniform1d or normal1d)"
            ))),
        }
    }
}

/// How the test score's target is obtained in each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplicationMethod {
    /// One `(n + 1) x (n + 1)` assignment on the augmented sample.
    #[default]
    FullAssignment,
    /// Fit the leave-one-out costs, then stream the test score.
    Streamed,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub scenario: Scenario,
    pub n: usize,
    /// Explicit grid; `None` plans one from `n + 1` and `alpha`.
    pub plan: Option<GridPlan>,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub method: ReplicationMethod,
}

impl SimulationConfig {
    pub fn new(scenario: Scenario, n: usize, alpha: f64, reps: usize, seed: u64) -> Self {
        Self {
            scenario,
            n,
            plan: None,
            alpha,
            reps,
            seed,
            method: ReplicationMethod::default(),
        }
    }

    pub fn with_plan(mut self, plan: GridPlan) -> Self {
        self.plan = Some(plan);
        self
    }

    pub fn grid(&self) -> Result<SphericalGrid<f64>> {
        let d = self.scenario.dim();
        let seed = stream_seed(self.seed, Stream::GridDirections);
        let plan = match self.plan {
            Some(p) => p,
            None => plan_decomposition(self.n + 1, d, Some(self.alpha))?.with_seed(seed),
        };
        if plan.total() != self.n + 1 {
            return Err(Error::Config(format!(
                "grid has {} points but n + 1 = {}",
                plan.total(),
                self.n + 1
            )));
        }
        build_grid(&plan, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub trials: usize,
    pub hits: usize,
    pub empirical_coverage: f64,
    pub nominal: f64,
    pub binomial_95_halfwidth: f64,
    pub j_alpha: usize,
    pub radius: f64,
    pub plan: GridPlan,
}

/// Assigned target index of the test score in every replication.
pub fn replicate_targets(cfg: &SimulationConfig, grid: &SphericalGrid<f64>) -> Result<Vec<usize>> {
    let second: Vec<f64> = grid.norms.iter().map(|r| r * r).collect();
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(cfg.seed, Stream::ScenarioData, rep as u64);
            let calib: Vec<Vec<f64>> = (0..cfg.n).map(|_| cfg.scenario.draw(&mut rng)).collect();
            let test = cfg.scenario.draw(&mut rng);
            match cfg.method {
                ReplicationMethod::FullAssignment => {
                    let sol = full_assignment(&calib, &test, &grid.points, &second)?;
                    Ok(sol.mapping[cfg.n])
                }
                ReplicationMethod::Streamed => fit(&calib, grid)?.assign_index(&test),
            }
        })
        .collect()
}

pub fn simulate_coverage(cfg: &SimulationConfig) -> Result<CoverageReport> {
    let grid = cfg.grid()?;
    let targets = replicate_targets(cfg, &grid)?;
    coverage_report(cfg, &grid, &targets)
}

/// Coverage and level histogram from one shared set of replications.
pub fn simulate_with_pit(cfg: &SimulationConfig) -> Result<(CoverageReport, PitHistogram)> {
    let grid = cfg.grid()?;
    let targets = replicate_targets(cfg, &grid)?;
    Ok((
        coverage_report(cfg, &grid, &targets)?,
        pit_report(cfg, &grid, &targets),
    ))
}

fn coverage_report(
    cfg: &SimulationConfig,
    grid: &SphericalGrid<f64>,
    targets: &[usize],
) -> Result<CoverageReport> {
    let radius = conformal_radius(grid, cfg.alpha)?;
    let hits = targets
        .iter()
        .filter(|&&k| grid.norms[k] <= radius.radius + 1e-12)
        .count();
    Ok(CoverageReport {
        trials: cfg.reps,
        hits,
        empirical_coverage: hits as f64 / cfg.reps as f64,
        nominal: radius.nominal_mass,
        binomial_95_halfwidth: binomial_95_halfwidth(radius.nominal_mass, cfg.reps),
        j_alpha: radius.j_alpha,
        radius: radius.radius,
        plan: grid.plan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitBin {
    /// Shell radius in `d >= 2`; signed target position in one dimension.
    pub level: f64,
    pub count: u64,
    pub frequency: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitHistogram {
    pub trials: usize,
    pub bins: Vec<PitBin>,
    pub chi_square: f64,
    pub p_value: f64,
}

/// Frequencies of the test score's transported level against the exact
/// discrete law of the grid.
pub fn pit_histogram(cfg: &SimulationConfig) -> Result<PitHistogram> {
    let grid = cfg.grid()?;
    let targets = replicate_targets(cfg, &grid)?;
    Ok(pit_report(cfg, &grid, &targets))
}

fn pit_report(
    cfg: &SimulationConfig,
    grid: &SphericalGrid<f64>,
    targets: &[usize],
) -> PitHistogram {
    let total = grid.len() as f64;
    let mut bins: Vec<(f64, u64, f64)> = if grid.dim == 1 {
        let mut levels: Vec<f64> = grid.points.iter().map(|p| p[0]).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
            .into_iter()
            .map(|v| {
                let mult = grid.points.iter().filter(|p| p[0] == v).count();
                (v, 0, mult as f64 / total)
            })
            .collect()
    } else {
        let p = grid.plan;
        let mut out = vec![(0.0, 0, p.n_origin as f64 / total)];
        out.extend(
            (1..=p.n_radii).map(|j| (j as f64 / p.n_radii as f64, 0, p.n_dirs as f64 / total)),
        );
        out
    };
    for &k in targets {
        let idx = if grid.dim == 1 {
            let v = grid.points[k][0];
            bins.iter()
                .position(|b| b.0 == v)
                .expect("target level present")
        } else {
            grid.shell(k)
        };
        bins[idx].1 += 1;
    }
    let observed: Vec<u64> = bins.iter().map(|b| b.1).collect();
    let expected: Vec<f64> = bins.iter().map(|b| b.2).collect();
    let (chi_square, p_value) = chi_square_gof(&observed, &expected);
    PitHistogram {
        trials: cfg.reps,
        bins: bins
            .into_iter()
            .map(|(level, count, expected)| PitBin {
                level,
                count,
                frequency: count as f64 / cfg.reps as f64,
                expected,
            })
            .collect(),
        chi_square,
        p_value,
    }
}
