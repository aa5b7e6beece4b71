// SPDX-License-Identifier: Apache-2.0

//! Command-line workflows: fit, predict, simulate, export-region.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::conformal::{conformal_radius, predict_set};
use crate::cpd::{cpd_evaluate, cpd_evaluate_randomized};
use crate::error::{Error, Result};
use crate::grid::{build_grid, plan_decomposition, plan_distinct, GridPlan};
use crate::io::{parse_vector, ArtifactFile, Meta, ScoreTable, FORMAT_VERSION};
use crate::partition::{fit, Mode};
use crate::rng::{stream_rng, stream_seed, Stream};
use crate::semidiscrete::{fit_sd_partition, fit_weights, DEFAULT_MASS_TOL, DEFAULT_MC_SAMPLES};
use crate::simulation::{simulate_coverage, simulate_with_pit, Scenario, SimulationConfig};

#[derive(Debug, Parser)]
#[command(
    name = "otcp",
    version,
    about = "Multivariate conformal prediction via optimal transport"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Discrete,
    Semidiscrete,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an artifact from a CSV of calibration scores.
    Fit {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        alpha: f64,
        /// Grid as `n_R,n_S,n_o`.
        #[arg(long, value_parser = parse_plan)]
        grid: Option<GridPlan>,
        #[arg(long, value_enum, default_value = "discrete")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Omit the timestamp and tool version so output is reproducible.
        #[arg(long)]
        no_meta: bool,
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        mc_samples: usize,
        #[arg(long, default_value_t = DEFAULT_MASS_TOL)]
        mass_tol: f64,
    },
    /// Evaluate candidate labels against a fitted artifact (JSON lines).
    Predict {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        prediction: String,
        #[arg(long)]
        candidates: PathBuf,
        /// Include the vector rank of each candidate.
        #[arg(long)]
        cpd: bool,
        /// Add a randomized in-cell rank (semidiscrete artifacts only).
        #[arg(long)]
        randomized: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo coverage report (CSV on stdout).
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append the transported-level histogram.
        #[arg(long)]
        pit: bool,
        #[arg(long, value_parser = parse_plan)]
        grid: Option<GridPlan>,
    },
    /// Write the half-space description of a quantile region.
    ExportRegion {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long, allow_hyphen_values = true)]
        prediction: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_plan(s: &str) -> std::result::Result<GridPlan, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format!("expected n_R,n_S,n_o as non-negative integers, got `{s}`"))?;
    match nums[..] {
        [r, d, o] => GridPlan::new(r, d, o, 0).map_err(|e| e.to_string()),
        _ => Err(format!(
            "expected three comma-separated integers, got `{s}`"
        )),
    }
}

/// Runs one command, writing results to `out` and diagnostics to `err`.
pub fn run<W: Write, E: Write>(cli: Cli, out: &mut W, err: &mut E) -> Result<()> {
    match cli.command {
        Command::Fit {
            scores,
            alpha,
            grid,
            mode,
            seed,
            out: path,
            no_meta,
            mc_samples,
            mass_tol,
        } => {
            let file = fit_command(
                &scores, alpha, grid, mode, seed, mc_samples, mass_tol, no_meta,
            )?;
            file.save(&path)?;
            let p = file.artifact.grid.plan;
            writeln!(
                out,
                "plan: n_R={} n_S={} n_o={}",
                p.n_radii, p.n_dirs, p.n_origin
            )?;
            writeln!(out, "j_alpha: {}", file.j_alpha)?;
            writeln!(out, "radius: {}", file.radius)?;
            writeln!(out, "nominal_mass: {}", file.nominal_mass)?;
            if file.radius >= 1.0 {
                writeln!(err, "warning: region may be unbounded (r=1)")?;
            }
            Ok(())
        }
        Command::Predict {
            artifact,
            prediction,
            candidates,
            cpd,
            randomized,
            seed,
        } => {
            let file = ArtifactFile::load(&artifact)?;
            let prediction = parse_vector(&prediction)?;
            let table = ScoreTable::read_path(&candidates)?;
            for line in predict_lines(&file, &prediction, &table, cpd, randomized, seed)? {
                writeln!(out, "{line}")?;
            }
            Ok(())
        }
        Command::Simulate {
            scenario,
            n,
            alpha,
            reps,
            seed,
            pit,
            grid,
        } => {
            let scenario: Scenario = scenario.parse()?;
            let mut cfg = SimulationConfig::new(scenario, n, alpha, reps, seed);
            if let Some(p) = grid {
                cfg = cfg.with_plan(p.with_seed(stream_seed(seed, Stream::GridDirections)));
            }
            write!(out, "{}", simulate_report(&cfg, pit)?)?;
            Ok(())
        }
        Command::ExportRegion {
            artifact,
            r,
            prediction,
            out: path,
        } => {
            let file = ArtifactFile::load(&artifact)?;
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("r must lie in [0, 1], got {r}")));
            }
            let prediction = match prediction {
                Some(p) => parse_vector(&p)?,
                None => vec![0.0; file.artifact.dim()],
            };
            let export = predict_set(&file.artifact, r, &prediction)?.export()?;
            let mut json = serde_json::to_string_pretty(&export)?;
            json.push('\n');
            std::fs::write(&path, json)?;
            writeln!(out, "exported {} regions", export.regions.len())?;
            Ok(())
        }
    }
}

/// Fits the artifact file written by `fit`.
#[allow(clippy::too_many_arguments)]
pub fn fit_command(
    scores: &std::path::Path,
    alpha: f64,
    grid: Option<GridPlan>,
    mode: ModeArg,
    seed: u64,
    mc_samples: usize,
    mass_tol: f64,
    no_meta: bool,
) -> Result<ArtifactFile> {
    let table = ScoreTable::read_path(scores)?;
    if table.is_empty() {
        return Err(Error::Input("score table has no rows".into()));
    }
    let d = table.dim();
    let n_plus_1 = table.len() + 1;
    let plan = match (grid, mode) {
        (Some(p), _) => p,
        (None, ModeArg::Discrete) => plan_decomposition(n_plus_1, d, Some(alpha))?,
        (None, ModeArg::Semidiscrete) => plan_distinct(n_plus_1, d)?,
    }
    .with_seed(stream_seed(seed, Stream::GridDirections));
    if plan.total() != n_plus_1 {
        return Err(Error::Config(format!(
            "grid {},{},{} has {} points but the table has n + 1 = {}",
            plan.n_radii,
            plan.n_dirs,
            plan.n_origin,
            plan.total(),
            n_plus_1
        )));
    }
    let grid = build_grid(&plan, d)?;
    let radius = conformal_radius(&grid, alpha)?;
    let (artifact, diagram) = match mode {
        ModeArg::Discrete => (fit(&table.rows, &grid)?, None),
        ModeArg::Semidiscrete => {
            if plan.n_origin > 1 {
                return Err(Error::Config(
                    "semidiscrete mode needs distinct sites (at most one origin point)".into(),
                ));
            }
            let diagram = fit_weights(
                &grid.points,
                mc_samples,
                mass_tol,
                stream_seed(seed, Stream::DualSample),
            )?;
            let moments = diagram.cell_moments()?;
            (
                fit_sd_partition(&table.rows, &grid, &moments)?,
                Some(diagram),
            )
        }
    };
    Ok(ArtifactFile {
        format_version: FORMAT_VERSION,
        mode: artifact.mode,
        alpha,
        j_alpha: radius.j_alpha,
        radius: radius.radius,
        nominal_mass: radius.nominal_mass,
        seed,
        artifact,
        diagram,
        meta: (!no_meta).then(Meta::now),
    })
}

#[derive(Serialize)]
struct PredictLine<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
    candidate: &'a [f64],
    in_set: bool,
    assigned_index: usize,
    norm_rank: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    vector_rank: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    randomized_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    randomized_point: Option<&'a [f64]>,
}

/// One JSON document per candidate row.
pub fn predict_lines(
    file: &ArtifactFile,
    prediction: &[f64],
    table: &ScoreTable,
    cpd: bool,
    randomized: bool,
    seed: u64,
) -> Result<Vec<String>> {
    let artifact = &file.artifact;
    if randomized && file.mode != Mode::Semidiscrete {
        return Err(Error::ModeMismatch(
            "--randomized needs a semidiscrete artifact".into(),
        ));
    }
    if table.dim() != artifact.dim() {
        return Err(Error::Shape(format!(
            "candidates have {} columns but the artifact is {}-dimensional",
            table.dim(),
            artifact.dim()
        )));
    }
    let set = predict_set(artifact, file.radius, prediction)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let eval = match (&file.diagram, randomized) {
                (Some(diagram), true) => {
                    let mut rng = stream_rng(seed, Stream::Tau, i as u64);
                    cpd_evaluate_randomized(y, prediction, artifact, diagram, &mut rng)?
                }
                _ => cpd_evaluate(y, prediction, artifact)?,
            };
            let line = PredictLine {
                id: table.ids.as_ref().map(|ids| ids[i].as_str()),
                candidate: y,
                in_set: set.contains(y)?,
                assigned_index: eval.assigned_index,
                norm_rank: eval.norm_rank,
                vector_rank: (cpd || randomized).then_some(eval.vector_rank.as_slice()),
                randomized_norm: eval.randomized_norm,
                randomized_point: eval.randomized_point.as_deref(),
            };
            Ok(serde_json::to_string(&line)?)
        })
        .collect()
}

/// Coverage row, then (with `pit`) a blank line and the level histogram.
pub fn simulate_report(cfg: &SimulationConfig, pit: bool) -> Result<String> {
    let (rep, hist) = if pit {
        let (r, h) = simulate_with_pit(cfg)?;
        (r, Some(h))
    } else {
        (simulate_coverage(cfg)?, None)
    };
    let mut s = String::new();
    s.push_str("scenario,n,alpha,reps,seed,n_radii,n_dirs,n_origin,j_alpha,radius,nominal,coverage,hits,binomial_95_halfwidth\n");
    s.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        cfg.scenario.name(),
        cfg.n,
        cfg.alpha,
        cfg.reps,
        cfg.seed,
        rep.plan.n_radii,
        rep.plan.n_dirs,
        rep.plan.n_origin,
        rep.j_alpha,
        rep.radius,
        rep.nominal,
        rep.empirical_coverage,
        rep.hits,
        rep.binomial_95_halfwidth
    ));
    if let Some(h) = hist {
        s.push('\n');
        s.push_str("level,count,frequency,expected,chi_square,p_value\n");
        for b in &h.bins {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.level, b.count, b.frequency, b.expected, h.chi_square, h.p_value
            ));
        }
    }
    Ok(s)
}
