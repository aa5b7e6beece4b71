// SPDX-License-Identifier: Apache-2.0

//! Conformal radius, quantile regions and prediction sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{required_shells, SphericalGrid};
use crate::partition::{Boundedness, Mode, PartitionArtifact, Region};
use crate::scalar::{sub, Scalar};

/// Margin by which a Laguerre cell must sit inside `B(0, r)` to be active.
pub const CELL_INCLUSION_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalRadius {
    pub j_alpha: usize,
    pub radius: f64,
    /// `(n_o + j_alpha n_S) / (n + 1)`.
    pub nominal_mass: f64,
}

impl ConformalRadius {
    /// The radius reaches the outermost shell, so the region may be unbounded.
    pub fn on_outer_shell(&self) -> bool {
        self.radius >= 1.0
    }
}

/// Smallest grid radius whose discrete spherical-uniform mass is at least
/// `1 - alpha`.
pub fn conformal_radius<T: Scalar>(grid: &SphericalGrid<T>, alpha: f64) -> Result<ConformalRadius> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let plan = &grid.plan;
    let j = required_shells(plan, alpha);
    if j > plan.n_radii as i64 {
        let min_alpha =
            1.0 - (plan.n_origin + plan.n_radii * plan.n_dirs) as f64 / plan.total() as f64;
        return Err(Error::Config(format!(
            "alpha = {alpha} is not reachable with this grid; the smallest achievable alpha is {min_alpha}"
        )));
    }
    let j_alpha = j.max(0) as usize;
    let radius = if plan.n_radii == 0 {
        0.0
    } else {
        j_alpha as f64 / plan.n_radii as f64
    };
    let nominal_mass = (plan.n_origin + j_alpha * plan.n_dirs) as f64 / plan.total() as f64;
    Ok(ConformalRadius {
        j_alpha,
        radius,
        nominal_mass,
    })
}

/// `Omega_r`: scores whose assigned target (or cell) lies in `B(0, r)`.
#[derive(Debug, Clone)]
pub struct QuantileRegion<'a, T> {
    pub radius: T,
    pub active: Vec<bool>,
    pub active_indices: Vec<usize>,
    /// `|I_r| / (n + 1)`, origin copies counted with multiplicity.
    pub nominal_mass: f64,
    pub artifact: &'a PartitionArtifact<T>,
}

pub fn quantile_region<T: Scalar>(artifact: &PartitionArtifact<T>, r: T) -> QuantileRegion<'_, T> {
    let slack = T::of(1e-12);
    let margin = match artifact.mode {
        Mode::Discrete => T::zero(),
        Mode::Semidiscrete => T::of(CELL_INCLUSION_MARGIN),
    };
    let active: Vec<bool> = artifact
        .cell_radius
        .iter()
        .map(|&c| c + margin <= r + slack)
        .collect();
    let active_indices: Vec<usize> = (0..active.len()).filter(|&k| active[k]).collect();
    QuantileRegion {
        radius: r,
        nominal_mass: active_indices.len() as f64 / active.len() as f64,
        active,
        active_indices,
        artifact,
    }
}

impl<T: Scalar> QuantileRegion<'_, T> {
    pub fn contains(&self, z: &[T]) -> Result<bool> {
        Ok(self.active[self.artifact.assign_index(z)?])
    }

    /// Active regions, one per distinct target.
    pub fn regions(&self) -> Result<Vec<Region<T>>> {
        self.active_indices
            .iter()
            .filter(|&&k| self.artifact.representative[k] == k)
            .map(|&k| self.artifact.region(k))
            .collect()
    }
}

/// `Omega_r(x) = yhat(x) + Omega_r` for the residual score `y - yhat(x)`.
#[derive(Debug, Clone)]
pub struct PredictionSet<'a, T> {
    pub region: QuantileRegion<'a, T>,
    pub prediction: Vec<T>,
}

pub fn predict_set<'a, T: Scalar>(
    artifact: &'a PartitionArtifact<T>,
    r: T,
    prediction: &[T],
) -> Result<PredictionSet<'a, T>> {
    if prediction.len() != artifact.dim() {
        return Err(Error::Shape(format!(
            "prediction of dimension {} against a {}-dimensional artifact",
            prediction.len(),
            artifact.dim()
        )));
    }
    Ok(PredictionSet {
        region: quantile_region(artifact, r),
        prediction: prediction.to_vec(),
    })
}

/// One exported polyhedron `{y : A y <= b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedRegion {
    pub index: usize,
    pub multiplicity: usize,
    pub target: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub boundedness: Boundedness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionExport {
    pub radius: f64,
    pub nominal_mass: f64,
    pub active_indices: Vec<usize>,
    pub prediction: Option<Vec<f64>>,
    pub regions: Vec<ExportedRegion>,
}

impl<T: Scalar> PredictionSet<'_, T> {
    pub fn contains(&self, y: &[T]) -> Result<bool> {
        if y.len() != self.prediction.len() {
            return Err(Error::Shape(format!(
                "candidate of dimension {} against prediction of dimension {}",
                y.len(),
                self.prediction.len()
            )));
        }
        self.region.contains(&sub(y, &self.prediction))
    }

    /// Half-space description in label space, with boundedness verdicts.
    pub fn export(&self) -> Result<RegionExport> {
        let a = self.region.artifact;
        let to64 = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        let regions = self
            .region
            .regions()?
            .into_iter()
            .map(|reg| {
                let boundedness = a.check_bounded(&reg);
                let shifted = reg.translated(&self.prediction);
                ExportedRegion {
                    index: reg.index,
                    multiplicity: a.multiplicity(reg.index),
                    target: to64(&a.centers[reg.index]),
                    normals: shifted.normals.iter().map(|n| to64(n)).collect(),
                    offsets: to64(&shifted.offsets),
                    boundedness,
                }
            })
            .collect();
        let is_zero = self.prediction.iter().all(|x| x.is_zero());
        Ok(RegionExport {
            radius: self.region.radius.as_f64(),
            nominal_mass: self.region.nominal_mass,
            active_indices: self.region.active_indices.clone(),
            prediction: (!is_zero).then(|| to64(&self.prediction)),
            regions,
        })
    }
}
