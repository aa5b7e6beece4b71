// SPDX-License-Identifier: Apache-2.0

//! The assignment stream: leave-one-column-out transport costs and the
//! polyhedral partition of score space they induce.
//!
//! For calibration scores `Z_1..Z_n` and targets indexed by `k`, fitting
//! computes `C_k`, the optimal cost of matching the scores to every target
//! except `k`. A query `Z` is then sent to `k* = argmin_k c(Z, k) + C_k`,
//! where `c(Z, k) = |Z|^2 - 2 <Z, m_k> + s_k`. Point targets use
//! `m_k = U_k`, `s_k = |U_k|^2`; Laguerre cells use their conditional
//! moments. Either way two competing targets are separated by an
//! affine half-space, so every decision region is a convex polyhedron.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Spanning};
use crate::grid::SphericalGrid;
use crate::lap::{solve_assignment, solve_without_column_assignment, Assignment, CostMatrix};
use crate::scalar::{dot, norm, norm_sq, sub, Scalar};

/// Absolute tolerance on the affine region forms.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Discrete,
    Semidiscrete,
}

/// Fitted, immutable assignment-stream state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionArtifact<T> {
    pub mode: Mode,
    pub grid: SphericalGrid<T>,
    pub calib_scores: Vec<Vec<T>>,
    /// Target representatives `m_k` (grid points or cell barycenters).
    pub centers: Vec<Vec<T>>,
    /// `s_k`: `|U_k|^2` for points, conditional second moment for cells.
    pub second_moments: Vec<T>,
    /// `C_k` for every target.
    pub leave_out_costs: Vec<T>,
    /// Optimal calibration-to-target matching with target `k` removed.
    pub sub_assignments: Vec<Vec<usize>>,
    /// `beta[j][k] = (s_k - s_j + C_k - C_j) / 2`.
    pub halfspace_offsets: Vec<Vec<T>>,
    /// `|m_k|`.
    pub target_norms: Vec<T>,
    /// Largest norm inside target `k`'s cell (equal to `target_norms` for
    /// point targets, an empirical maximum for Laguerre cells).
    pub cell_radius: Vec<T>,
    /// Smallest index carrying an identical target, per target.
    pub representative: Vec<usize>,
}

/// Expected squared cost of sending `z` to a target with moments `(m, s)`.
#[inline]
pub fn target_cost<T: Scalar>(z: &[T], center: &[T], second_moment: T) -> T {
    let two = T::one() + T::one();
    (norm_sq(z) - two * dot(z, center) + second_moment).max(T::zero())
}

/// Discrete fit against the grid points.
pub fn fit<T: Scalar>(
    calib_scores: &[Vec<T>],
    grid: &SphericalGrid<T>,
) -> Result<PartitionArtifact<T>> {
    let centers = grid.points.clone();
    let second: Vec<T> = centers.iter().map(|u| norm_sq(u)).collect();
    let radius = grid.norms.clone();
    fit_targets(Mode::Discrete, calib_scores, grid, centers, second, radius)
}

pub(crate) fn fit_targets<T: Scalar>(
    mode: Mode,
    calib_scores: &[Vec<T>],
    grid: &SphericalGrid<T>,
    centers: Vec<Vec<T>>,
    second_moments: Vec<T>,
    cell_radius: Vec<T>,
) -> Result<PartitionArtifact<T>> {
    let n_targets = centers.len();
    let n = calib_scores.len();
    if n + 1 != n_targets {
        return Err(Error::Shape(format!(
            "{n} calibration scores need {} targets, grid has {n_targets}",
            n + 1
        )));
    }
    if let Some(z) = calib_scores.iter().find(|z| z.len() != grid.dim) {
        return Err(Error::Shape(format!(
            "score of dimension {} against a {}-dimensional grid",
            z.len(),
            grid.dim
        )));
    }
    if calib_scores.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite calibration score".into()));
    }

    let (leave_out_costs, sub_assignments) = if n == 0 {
        (vec![T::zero()], vec![Vec::new()])
    } else {
        let cost = CostMatrix::from_fn(n, n_targets, |i, k| {
            target_cost(&calib_scores[i], &centers[k], second_moments[k])
        })?;
        let solved: Vec<Assignment<T>> = (0..n_targets)
            .into_par_iter()
            .map(|k| solve_without_column_assignment(&cost, k))
            .collect::<Result<_>>()?;
        solved
            .into_iter()
            .map(|a| (a.total_cost, a.mapping))
            .unzip()
    };

    let half = T::of(0.5);
    let halfspace_offsets = (0..n_targets)
        .map(|j| {
            (0..n_targets)
                .map(|k| {
                    half * (second_moments[k] - second_moments[j] + leave_out_costs[k]
                        - leave_out_costs[j])
                })
                .collect()
        })
        .collect();
    let target_norms = centers.iter().map(|c| norm(c)).collect();
    let representative = (0..n_targets)
        .map(|k| {
            (0..k)
                .find(|&j| centers[j] == centers[k] && second_moments[j] == second_moments[k])
                .unwrap_or(k)
        })
        .collect();

    Ok(PartitionArtifact {
        mode,
        grid: grid.clone(),
        calib_scores: calib_scores.to_vec(),
        centers,
        second_moments,
        leave_out_costs,
        sub_assignments,
        halfspace_offsets,
        target_norms,
        cell_radius,
        representative,
    })
}

/// A decision region `R_j = {Z : <Z, m_k - m_j> <= beta[j][k], k != j}`.
///
/// Constraints against targets identical to `j` are dropped: their normal
/// is zero and the constraint is vacuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region<T> {
    pub index: usize,
    pub neighbors: Vec<usize>,
    pub normals: Vec<Vec<T>>,
    pub offsets: Vec<T>,
}

impl<T: Scalar> Region<T> {
    /// `L(Z) = max_k <Z, a_k> - b_k`; non-positive inside the region.
    pub fn slack(&self, z: &[T]) -> T {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, &b)| dot(z, a) - b)
            .fold(T::neg_infinity(), T::max)
    }

    pub fn contains(&self, z: &[T]) -> bool {
        self.contains_with(z, T::of(MEMBERSHIP_TOL))
    }

    pub fn contains_with(&self, z: &[T], tol: T) -> bool {
        self.normals.is_empty() || self.slack(z) <= tol
    }

    /// Same region expressed in `y = z + shift` coordinates.
    pub fn translated(&self, shift: &[T]) -> Region<T> {
        Region {
            index: self.index,
            neighbors: self.neighbors.clone(),
            normals: self.normals.clone(),
            offsets: self
                .normals
                .iter()
                .zip(&self.offsets)
                .map(|(a, &b)| b + dot(a, shift))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundedness {
    ProvenBounded,
    ProvenUnbounded,
    Unknown,
}

impl<T: Scalar> PartitionArtifact<T> {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// `f_k(Z) = c(Z, k) + C_k`.
    pub fn stream_cost(&self, z: &[T], k: usize) -> T {
        target_cost(z, &self.centers[k], self.second_moments[k]) + self.leave_out_costs[k]
    }

    /// Index minimizing `f_k(Z)`, smallest index on ties.
    pub fn assign_index(&self, z: &[T]) -> Result<usize> {
        if z.len() != self.dim() {
            return Err(Error::Shape(format!(
                "query of dimension {} against a {}-dimensional artifact",
                z.len(),
                self.dim()
            )));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite query".into()));
        }
        let mut best = 0;
        let mut best_cost = self.stream_cost(z, 0);
        for k in 1..self.len() {
            let c = self.stream_cost(z, k);
            if c < best_cost {
                best = k;
                best_cost = c;
            }
        }
        Ok(best)
    }

    /// `k*(Z)` together with `psi(Z) = m_{k*}`.
    pub fn assign(&self, z: &[T]) -> Result<(usize, &[T])> {
        let k = self.assign_index(z)?;
        Ok((k, &self.centers[k]))
    }

    /// Full transport of `{Z_1..Z_n, Z}`: entry `i < n` is the target of
    /// `Z_i`, the last entry is `k*(Z)`.
    pub fn augmented_assignment(&self, z: &[T]) -> Result<Vec<usize>> {
        let k = self.assign_index(z)?;
        let mut out = self.sub_assignments[k].clone();
        out.push(k);
        Ok(out)
    }

    pub fn region(&self, j: usize) -> Result<Region<T>> {
        if j >= self.len() {
            return Err(Error::Index {
                index: j,
                len: self.len(),
            });
        }
        let rep = self.representative[j];
        let mut region = Region {
            index: j,
            neighbors: vec![],
            normals: vec![],
            offsets: vec![],
        };
        for k in 0..self.len() {
            if k == j || self.representative[k] == rep {
                continue;
            }
            region.neighbors.push(k);
            region.normals.push(sub(&self.centers[k], &self.centers[j]));
            region.offsets.push(self.halfspace_offsets[j][k]);
        }
        Ok(region)
    }

    /// Distinct targets, each listed once by its smallest index.
    pub fn distinct_targets(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.representative[k] == k)
            .collect()
    }

    pub fn multiplicity(&self, j: usize) -> usize {
        let rep = self.representative[j];
        self.representative.iter().filter(|&&r| r == rep).count()
    }

    /// Certifies whether `R_j` is bounded.
    ///
    /// Point targets strictly inside the unit ball are interior points of
    /// the grid's convex hull whenever the grid directions positively span
    /// space, which bounds the region. Otherwise the region normals are
    /// tested directly, and a recession direction is searched among
    /// `m_j / |m_j|` and seeded random rays.
    pub fn check_bounded(&self, region: &Region<T>) -> Boundedness {
        let j = region.index;
        let d = self.dim();
        let tol = 1e-12;
        if self.mode == Mode::Discrete && self.grid.norms[j] < T::one() && self.grid_spans_space() {
            return Boundedness::ProvenBounded;
        }
        let normals: Vec<Vec<f64>> = region
            .normals
            .iter()
            .map(|a| a.iter().map(|x| x.as_f64()).collect())
            .collect();
        let n_j = self.target_norms[j].as_f64();
        let hints: Vec<Vec<f64>> = if n_j > 0.0 {
            vec![self.centers[j].iter().map(|x| x.as_f64() / n_j).collect()]
        } else {
            vec![]
        };
        match geometry::positive_spanning(&normals, d, &hints, tol) {
            Spanning::Yes => Boundedness::ProvenBounded,
            Spanning::No(_) => Boundedness::ProvenUnbounded,
            Spanning::Unknown => Boundedness::Unknown,
        }
    }

    fn grid_spans_space(&self) -> bool {
        let dirs: Vec<Vec<f64>> = self
            .grid
            .directions()
            .iter()
            .map(|u| u.iter().map(|x| x.as_f64()).collect())
            .collect();
        matches!(
            geometry::positive_spanning(&dirs, self.dim(), &[], 1e-12),
            Spanning::Yes
        )
    }
}

/// Optimal assignment of the augmented set `{Z_1..Z_n, Z}` to all targets,
/// solved from scratch. Reference route for the streamed `assign`.
pub fn full_assignment<T: Scalar>(
    calib_scores: &[Vec<T>],
    query: &[T],
    centers: &[Vec<T>],
    second_moments: &[T],
) -> Result<Assignment<T>> {
    let n = calib_scores.len();
    let cost = CostMatrix::from_fn(n + 1, centers.len(), |i, k| {
        let z = if i < n { &calib_scores[i][..] } else { query };
        target_cost(z, &centers[k], second_moments[k])
    })?;
    Ok(solve_assignment(&cost))
}
