// SPDX-License-Identifier: Apache-2.0

//! On-disk formats: JSON artifacts and CSV score tables.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Mode, PartitionArtifact};
use crate::semidiscrete::LaguerreDiagram;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool_version: String,
    pub created_unix: u64,
}

impl Meta {
    pub fn now() -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
        }
    }
}

/// A fitted artifact together with the calibration level it was fitted for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactFile {
    pub format_version: u32,
    pub mode: Mode,
    pub alpha: f64,
    pub j_alpha: usize,
    pub radius: f64,
    pub nominal_mass: f64,
    pub seed: u64,
    pub artifact: PartitionArtifact<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagram: Option<LaguerreDiagram<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl ArtifactFile {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ArtifactFile = serde_json::from_str(s)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported artifact format version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.mode != file.artifact.mode {
            return Err(Error::Config(
                "artifact mode does not match its header".into(),
            ));
        }
        if file.mode == Mode::Semidiscrete && file.diagram.is_none() {
            return Err(Error::Config(
                "semidiscrete artifact without a diagram".into(),
            ));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Rows of numeric score columns, with optional string identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub columns: Vec<String>,
    pub ids: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read(fs::File::open(path)?)
    }

    /// Parses a headed CSV. A column named `id` is kept as identifiers;
    /// every other column must hold finite numbers.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let id_col = header.iter().position(|h| h.eq_ignore_ascii_case("id"));
        let columns: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != id_col)
            .map(|(_, h)| h.to_string())
            .collect();
        if columns.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "header has no score columns".into(),
            });
        }
        let mut ids = id_col.map(|_| Vec::new());
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(e, 0))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            let mut row = Vec::with_capacity(columns.len());
            for (i, field) in record.iter().enumerate() {
                if Some(i) == id_col {
                    ids.as_mut().expect("id column").push(field.to_string());
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{field}` in column `{}` is not a number", &header[i]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value in column `{}`", &header[i]),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        Ok(Self { columns, ids, rows })
    }
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Parses `"a,b,c"` into finite reals.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("`{t}` is not a finite number in `{s}`")))
        })
        .collect()
}
