// SPDX-License-Identifier: Apache-2.0

//! Multivariate conformal prediction with vector-valued scores.
//!
//! Calibration scores are matched to a spherical reference grid by an
//! optimal assignment. A new score is transported by adding it as one extra
//! point, which reduces to an argmin over precomputed leave-one-out costs.
//! Conformal regions are preimages of centered balls; predictive
//! distributions come from the transported rank and, in the semidiscrete
//! mode, from a randomized draw inside a Laguerre cell.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The type
//! aliases below fix `f64`, which is what the file formats and the CLI use.

pub mod cli;
pub mod conformal;
pub mod cpd;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod lap;
pub mod partition;
pub mod rng;
pub mod scalar;
pub mod scores;
pub mod semidiscrete;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Artifact = partition::PartitionArtifact<f64>;
pub type Grid = grid::SphericalGrid<f64>;
pub type Diagram = semidiscrete::LaguerreDiagram<f64>;
pub type Costs = lap::CostMatrix<f64>;
pub type Evaluation = cpd::CpdEvaluation<f64>;
