// SPDX-License-Identifier: Apache-2.0

//! Discrete spherical-uniform target grids and the continuous sampler.
//!
//! A grid with `n + 1` points is made of `n_origin` copies of the origin and
//! `n_radii` concentric shells of radius `j / n_radii`, each carrying the
//! same `n_dirs` unit directions. Point order is fixed: origin copies first,
//! then shell by shell from the inside out, directions in generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The `(n_R, n_S, n_o)` decomposition of the target count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPlan {
    pub n_radii: usize,
    pub n_dirs: usize,
    pub n_origin: usize,
    /// Seed for pseudo-random directions, only read when `d >= 3`.
    pub direction_seed: u64,
}

impl GridPlan {
    pub fn new(
        n_radii: usize,
        n_dirs: usize,
        n_origin: usize,
        direction_seed: u64,
    ) -> Result<Self> {
        let plan = Self {
            n_radii,
            n_dirs,
            n_origin,
            direction_seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.n_radii == 0) != (self.n_dirs == 0) {
            return Err(Error::Plan(
                "n_radii and n_dirs must both be positive (or both zero for an origin-only grid)"
                    .into(),
            ));
        }
        if self.total() == 0 {
            return Err(Error::Plan("grid has no points".into()));
        }
        Ok(())
    }

    /// Number of target points, `n + 1`.
    pub fn total(&self) -> usize {
        self.n_origin + self.n_radii * self.n_dirs
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.direction_seed = seed;
        self
    }
}

/// Smallest shell index `j` with `(n_o + j n_S) / (n + 1) >= 1 - alpha`,
/// before clamping to `[0, n_R]`.
pub fn required_shells(plan: &GridPlan, alpha: f64) -> i64 {
    if plan.n_dirs == 0 {
        return 0;
    }
    let x = (plan.total() as f64 * (1.0 - alpha) - plan.n_origin as f64) / plan.n_dirs as f64;
    // Absorb rounding noise in products such as 100 * 0.9.
    (x - 1e-9 * x.abs().max(1.0)).ceil() as i64
}

/// Chooses a decomposition of `n_plus_1` target points.
///
/// The default is the square-root layout on the `n` calibration points:
/// `n_R = ceil(sqrt(n))`, `n_S = floor(n / n_R)`, the remainder going to the
/// origin. In one dimension the directions are `{+1, -1}`, so `n_S = 2`.
/// When `alpha_hint` is given and the default would put the conformal radius
/// on the outermost shell, all feasible triples are enumerated and the one
/// with the fewest origin copies (then the most balanced `n_R`, `n_S`) that
/// keeps `j_alpha < n_R` is returned.
pub fn plan_decomposition(n_plus_1: usize, d: usize, alpha_hint: Option<f64>) -> Result<GridPlan> {
    if n_plus_1 < 2 {
        return Err(Error::Input(format!(
            "need at least 2 target points, got {n_plus_1}"
        )));
    }
    if d == 0 {
        return Err(Error::Input("dimension must be at least 1".into()));
    }
    let default = if d == 1 {
        GridPlan::new(n_plus_1 / 2, 2, n_plus_1 % 2, 0)?
    } else {
        let n = n_plus_1 - 1;
        let n_radii = (1..=n).find(|r| r * r >= n).unwrap_or(1);
        let n_dirs = n / n_radii;
        GridPlan::new(n_radii, n_dirs, n_plus_1 - n_radii * n_dirs, 0)?
    };
    let Some(alpha) = alpha_hint else {
        return Ok(default);
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let bounded = |p: &GridPlan| required_shells(p, alpha) < p.n_radii as i64;
    if bounded(&default) {
        return Ok(default);
    }
    let mut best: Option<GridPlan> = None;
    for n_radii in 1..=n_plus_1 {
        for n_dirs in 1..=n_plus_1 / n_radii {
            if d == 1 && n_dirs != 2 {
                continue;
            }
            let cand = GridPlan::new(n_radii, n_dirs, n_plus_1 - n_radii * n_dirs, 0)?;
            if !bounded(&cand) {
                continue;
            }
            let key = |p: &GridPlan| {
                (
                    p.n_origin,
                    p.n_radii.abs_diff(p.n_dirs),
                    usize::MAX - p.n_radii,
                )
            };
            if best.as_ref().is_none_or(|b| key(&cand) < key(b)) {
                best = Some(cand);
            }
        }
    }
    Ok(best.unwrap_or(default))
}

/// Decomposition with at most one origin point, for targets that must be
/// pairwise distinct. Minimizes `|n_R - n_S|`, preferring `n_o = 0`.
pub fn plan_distinct(n_plus_1: usize, d: usize) -> Result<GridPlan> {
    if n_plus_1 < 2 {
        return Err(Error::Input(format!(
            "need at least 2 target points, got {n_plus_1}"
        )));
    }
    let mut best: Option<(usize, usize, GridPlan)> = None;
    for n_origin in 0..=1usize {
        let rest = n_plus_1 - n_origin;
        for n_radii in 1..=rest {
            if !rest.is_multiple_of(n_radii) {
                continue;
            }
            let n_dirs = rest / n_radii;
            if d == 1 && n_dirs != 2 {
                continue;
            }
            let key = (n_radii.abs_diff(n_dirs), n_origin);
            let plan = GridPlan::new(n_radii, n_dirs, n_origin, 0)?;
            if best.as_ref().is_none_or(|(a, b, _)| key < (*a, *b)) {
                best = Some((key.0, key.1, plan));
            }
        }
    }
    best.map(|(_, _, p)| p).ok_or_else(|| {
        Error::Plan(format!(
            "no distinct-site grid with {n_plus_1} points in d={d}"
        ))
    })
}

/// Immutable target grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalGrid<T> {
    pub dim: usize,
    pub plan: GridPlan,
    pub points: Vec<Vec<T>>,
    /// Exact radius of each point (`j / n_R`, or 0 at the origin).
    pub norms: Vec<T>,
}

impl<T: Scalar> SphericalGrid<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shell index of point `k`: 0 for origin copies, `j` for radius `j / n_R`.
    pub fn shell(&self, k: usize) -> usize {
        if k < self.plan.n_origin {
            0
        } else {
            1 + (k - self.plan.n_origin) / self.plan.n_dirs
        }
    }

    /// The `n_S` unit directions shared by all shells.
    pub fn directions(&self) -> &[Vec<T>] {
        let start = self.plan.n_origin + (self.plan.n_radii.saturating_sub(1)) * self.plan.n_dirs;
        if self.plan.n_radii == 0 {
            &[]
        } else {
            &self.points[start..start + self.plan.n_dirs]
        }
    }
}

/// Unit directions for a grid: `{+1, -1}` in 1D, equal angles from 0 in
/// 2D, seeded normalized Gaussian vectors otherwise.
fn unit_directions<T: Scalar>(plan: &GridPlan, d: usize) -> Result<Vec<Vec<T>>> {
    let n_dirs = plan.n_dirs;
    match d {
        0 => Err(Error::Input("dimension must be at least 1".into())),
        1 => {
            if !n_dirs.is_multiple_of(2) {
                return Err(Error::Plan(format!(
                    "1D grids need an even number of directions, got {n_dirs}"
                )));
            }
            Ok((0..n_dirs)
                .map(|s| vec![if s % 2 == 0 { T::one() } else { -T::one() }])
                .collect())
        }
        2 => Ok((0..n_dirs)
            .map(|s| {
                let angle = std::f64::consts::TAU * s as f64 / n_dirs as f64;
                vec![T::of(angle.cos()), T::of(angle.sin())]
            })
            .collect()),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.direction_seed);
            Ok((0..n_dirs).map(|_| random_unit(d, &mut rng)).collect())
        }
    }
}

fn random_unit<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-12 {
            return g.into_iter().map(|x| T::of(x / len)).collect();
        }
    }
}

pub fn build_grid<T: Scalar>(plan: &GridPlan, d: usize) -> Result<SphericalGrid<T>> {
    plan.validate()?;
    let dirs = unit_directions::<T>(plan, d)?;
    let mut points = Vec::with_capacity(plan.total());
    let mut norms = Vec::with_capacity(plan.total());
    for _ in 0..plan.n_origin {
        points.push(vec![T::zero(); d]);
        norms.push(T::zero());
    }
    for j in 1..=plan.n_radii {
        let radius = T::of(j as f64 / plan.n_radii as f64);
        for u in &dirs {
            points.push(u.iter().map(|&x| x * radius).collect());
            norms.push(radius);
        }
    }
    Ok(SphericalGrid {
        dim: d,
        plan: *plan,
        points,
        norms,
    })
}

/// One draw `R * theta` with `R ~ U(0, 1)` and `theta` uniform on the sphere.
pub fn sample_spherical_uniform<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<T> {
    let dir: Vec<T> = random_unit(d, rng);
    let radius = T::of(rng.random::<f64>());
    dir.into_iter().map(|x| x * radius).collect()
}
