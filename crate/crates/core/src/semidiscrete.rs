// SPDX-License-Identifier: Apache-2.0

//! Semi-discrete transport onto the continuous spherical-uniform law.
//!
//! Power (Laguerre) cells `A_k = {u : |u - U_k|^2 + w_k <= |u - U_l|^2 + w_l}`
//! are equalized to mass `1 / (n + 1)` by ascent on the concave dual
//! `K(w) = E[min_k |U - U_k|^2 + w_k] - mean(w)`, whose gradient is
//! `mass_k(w) - 1 / (n + 1)`. Masses are Monte Carlo estimates over one
//! fixed sample reused by every iteration, so `K` is evaluated exactly for
//! that sample and accepted steps never decrease it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample_spherical_uniform, SphericalGrid};
use crate::partition::{fit_targets, target_cost, Mode, PartitionArtifact};
use crate::rng::{stream_rng, Stream};
use crate::scalar::{dist_sq, norm, norm_sq, Scalar};

pub const DEFAULT_MC_SAMPLES: usize = 200_000;
pub const DEFAULT_MASS_TOL: f64 = 5e-3;
pub const MIN_MC_SAMPLES: usize = 10_000;
pub const MAX_ITERATIONS: usize = 5_000;
/// Proposal budget of the in-cell rejection sampler.
pub const MAX_PROPOSALS: usize = 1_000_000;

/// Fitted power diagram with equal-mass cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaguerreDiagram<T> {
    pub dim: usize,
    pub sites: Vec<Vec<T>>,
    pub weights: Vec<T>,
    pub mass_estimates: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    pub mass_tol: f64,
    pub max_mass_deviation: f64,
    pub iterations: usize,
    /// Dual objective after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Power cell containing `u`, smallest index on ties.
pub fn power_cell<T: Scalar>(u: &[T], sites: &[Vec<T>], weights: &[T]) -> usize {
    let mut best = 0;
    let mut best_val = dist_sq(u, &sites[0]) + weights[0];
    for k in 1..sites.len() {
        let v = dist_sq(u, &sites[k]) + weights[k];
        if v < best_val {
            best = k;
            best_val = v;
        }
    }
    best
}

/// The fixed spherical-uniform sample behind a diagram.
pub fn crn_sample<T: Scalar>(dim: usize, size: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = stream_rng(seed, Stream::DualSample, 0);
    (0..size)
        .map(|_| sample_spherical_uniform(dim, &mut rng))
        .collect()
}

struct DualEval {
    objective: f64,
    masses: Vec<f64>,
}

fn eval_dual(sqdist: &[f64], n_sites: usize, weights: &[f64]) -> DualEval {
    let m = sqdist.len() / n_sites;
    let (sum, counts) = sqdist
        .par_chunks(n_sites * 1024)
        .map(|block| {
            let mut counts = vec![0u64; n_sites];
            let mut sum = 0.0;
            for row in block.chunks(n_sites) {
                let mut best = 0;
                let mut best_val = row[0] + weights[0];
                for k in 1..n_sites {
                    let v = row[k] + weights[k];
                    if v < best_val {
                        best = k;
                        best_val = v;
                    }
                }
                counts[best] += 1;
                sum += best_val;
            }
            (sum, counts)
        })
        .reduce(
            || (0.0, vec![0u64; n_sites]),
            |(s1, mut c1), (s2, c2)| {
                c1.iter_mut().zip(c2).for_each(|(a, b)| *a += b);
                (s1 + s2, c1)
            },
        );
    let mean_w = weights.iter().sum::<f64>() / n_sites as f64;
    DualEval {
        objective: sum / m as f64 - mean_w,
        masses: counts.into_iter().map(|c| c as f64 / m as f64).collect(),
    }
}

fn max_deviation(masses: &[f64]) -> f64 {
    let target = 1.0 / masses.len() as f64;
    masses
        .iter()
        .map(|m| (m - target).abs())
        .fold(0.0, f64::max)
}

/// Fits equal-mass power-cell weights for distinct `sites` in the unit ball.
pub fn fit_weights<T: Scalar>(
    sites: &[Vec<T>],
    mc_samples: usize,
    mass_tol: f64,
    seed: u64,
) -> Result<LaguerreDiagram<T>> {
    let n_sites = sites.len();
    if n_sites == 0 {
        return Err(Error::Input("no sites".into()));
    }
    let dim = sites[0].len();
    if sites.iter().any(|s| s.len() != dim) {
        return Err(Error::Shape("sites of mixed dimension".into()));
    }
    for i in 0..n_sites {
        for j in 0..i {
            if sites[i] == sites[j] {
                return Err(Error::Input(format!("duplicate sites {j} and {i}")));
            }
        }
    }
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::Config(format!(
            "need at least {MIN_MC_SAMPLES} Monte Carlo samples, got {mc_samples}"
        )));
    }

    let sample: Vec<Vec<T>> = crn_sample(dim, mc_samples, seed);
    let sites64: Vec<Vec<f64>> = sites
        .iter()
        .map(|s| s.iter().map(|x| x.as_f64()).collect())
        .collect();
    let sqdist: Vec<f64> = sample
        .par_iter()
        .flat_map_iter(|u| {
            let u64: Vec<f64> = u.iter().map(|x| x.as_f64()).collect();
            sites64
                .iter()
                .map(move |s| dist_sq(&u64, s))
                .collect::<Vec<_>>()
        })
        .collect();

    let target = 1.0 / n_sites as f64;
    let mut w = vec![0.0; n_sites];
    let mut cur = eval_dual(&sqdist, n_sites, &w);
    let mut trace = vec![cur.objective];
    // Gradient step in units of `n + 1`, adapted by halving and regrowth.
    let mut step = 1.0;
    let mut iterations = 0;
    while max_deviation(&cur.masses) > mass_tol && iterations < MAX_ITERATIONS {
        iterations += 1;
        let scale = step * n_sites as f64;
        let mut trial: Vec<f64> = w
            .iter()
            .zip(&cur.masses)
            .map(|(wk, mk)| wk + scale * (mk - target))
            .collect();
        let mean = trial.iter().sum::<f64>() / n_sites as f64;
        trial.iter_mut().for_each(|x| *x -= mean);
        let next = eval_dual(&sqdist, n_sites, &trial);
        if next.objective >= cur.objective {
            w = trial;
            cur = next;
            trace.push(cur.objective);
            step *= 1.25;
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    let deviation = max_deviation(&cur.masses);
    if deviation > mass_tol {
        return Err(Error::Convergence {
            deviation,
            iterations,
        });
    }
    Ok(LaguerreDiagram {
        dim,
        sites: sites.to_vec(),
        weights: w.into_iter().map(T::of).collect(),
        mass_estimates: cur.masses,
        mc_samples,
        seed,
        mass_tol,
        max_mass_deviation: deviation,
        iterations,
        objective_trace: trace,
    })
}

/// Conditional first and second moments of the spherical-uniform law in
/// each cell, estimated on the diagram's fixed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMoments<T> {
    pub means: Vec<Vec<T>>,
    pub second_moments: Vec<T>,
    pub counts: Vec<usize>,
    /// Largest sampled norm in each cell.
    pub max_norms: Vec<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> LaguerreDiagram<T> {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn cell_of(&self, u: &[T]) -> usize {
        power_cell(u, &self.sites, &self.weights)
    }

    pub fn sample(&self) -> Vec<Vec<T>> {
        crn_sample(self.dim, self.mc_samples, self.seed)
    }

    /// Cell masses on an independent sample drawn from `rng`.
    pub fn audit_masses<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<f64> {
        let mut counts = vec![0usize; self.len()];
        for _ in 0..size {
            let u: Vec<T> = sample_spherical_uniform(self.dim, rng);
            counts[self.cell_of(&u)] += 1;
        }
        counts.into_iter().map(|c| c as f64 / size as f64).collect()
    }

    /// Dual objective at the fitted weights for the given sample.
    pub fn dual_objective(&self, sample: &[Vec<T>]) -> f64 {
        let mean_w = self.weights.iter().map(|w| w.as_f64()).sum::<f64>() / self.len() as f64;
        let total: f64 = sample
            .iter()
            .map(|u| {
                let k = self.cell_of(u);
                (dist_sq(u, &self.sites[k]) + self.weights[k]).as_f64()
            })
            .sum();
        total / sample.len() as f64 - mean_w
    }

    pub fn cell_moments(&self) -> Result<CellMoments<T>> {
        let n = self.len();
        let mut sums = vec![vec![0.0f64; self.dim]; n];
        let mut second = vec![0.0f64; n];
        let mut counts = vec![0usize; n];
        let mut max_norms = vec![T::zero(); n];
        for u in self.sample() {
            let k = self.cell_of(&u);
            counts[k] += 1;
            for (s, x) in sums[k].iter_mut().zip(&u) {
                *s += x.as_f64();
            }
            second[k] += norm_sq(&u).as_f64();
            max_norms[k] = max_norms[k].max(norm(&u));
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Internal(format!("cell {k} received no samples")));
        }
        let floor = self.mc_samples / (2 * n);
        let warnings = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c < floor)
            .map(|(k, c)| format!("cell {k} has only {c} samples (< {floor})"))
            .collect();
        Ok(CellMoments {
            means: sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| s.iter().map(|x| T::of(x / c as f64)).collect())
                .collect(),
            second_moments: second
                .iter()
                .zip(&counts)
                .map(|(s, &c)| T::of(s / c as f64))
                .collect(),
            counts,
            max_norms,
            warnings,
        })
    }
}

impl<T: Scalar> CellMoments<T> {
    /// Point cells: `m_k = U_k`, `s_k = |U_k|^2`.
    pub fn degenerate(points: &[Vec<T>]) -> Self {
        Self {
            means: points.to_vec(),
            second_moments: points.iter().map(|p| norm_sq(p)).collect(),
            counts: vec![1; points.len()],
            max_norms: points.iter().map(|p| norm(p)).collect(),
            warnings: vec![],
        }
    }
}

/// `c(z, k) = |z|^2 - 2 <z, m_k> + s_k`.
pub fn expected_cost<T: Scalar>(z: &[T], k: usize, moments: &CellMoments<T>) -> T {
    target_cost(z, &moments.means[k], moments.second_moments[k])
}

/// Assignment stream against the cells: the discrete construction with
/// `U_k -> m_k` and `|U_k|^2 -> s_k`.
pub fn fit_sd_partition<T: Scalar>(
    calib_scores: &[Vec<T>],
    sites: &SphericalGrid<T>,
    moments: &CellMoments<T>,
) -> Result<PartitionArtifact<T>> {
    if moments.means.len() != sites.len() {
        return Err(Error::Shape(format!(
            "{} cell moments for {} sites",
            moments.means.len(),
            sites.len()
        )));
    }
    fit_targets(
        Mode::Semidiscrete,
        calib_scores,
        sites,
        moments.means.clone(),
        moments.second_moments.clone(),
        moments.max_norms.clone(),
    )
}

/// Conditional law of the target inside one cell.
pub trait CellLaw<T> {
    fn sample_cell<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<T>>;
}

impl<T: Scalar> CellLaw<T> for LaguerreDiagram<T> {
    /// Rejection sampling from the spherical-uniform law.
    fn sample_cell<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<T>> {
        if k >= self.len() {
            return Err(Error::Index {
                index: k,
                len: self.len(),
            });
        }
        for _ in 0..MAX_PROPOSALS {
            let u: Vec<T> = sample_spherical_uniform(self.dim, rng);
            if self.cell_of(&u) == k {
                return Ok(u);
            }
        }
        Err(Error::Sampling(format!(
            "no proposal landed in cell {k} after {MAX_PROPOSALS} draws"
        )))
    }
}

/// Cells collapsed to their sites; sampling returns the site itself.
#[derive(Debug, Clone, Copy)]
pub struct PointCells<'a, T>(pub &'a [Vec<T>]);

impl<T: Scalar> CellLaw<T> for PointCells<'_, T> {
    fn sample_cell<R: Rng + ?Sized>(&self, k: usize, _rng: &mut R) -> Result<Vec<T>> {
        self.0.get(k).cloned().ok_or(Error::Index {
            index: k,
            len: self.0.len(),
        })
    }
}

/// Randomized transport of `z`: a draw from the target law conditioned on
/// the cell `k*(z)`. Returns the cell index and the draw.
pub fn randomized_transport<T: Scalar, L: CellLaw<T>, R: Rng + ?Sized>(
    z: &[T],
    artifact: &PartitionArtifact<T>,
    cells: &L,
    rng: &mut R,
) -> Result<(usize, Vec<T>)> {
    let k = artifact.assign_index(z)?;
    Ok((k, cells.sample_cell(k, rng)?))
}
