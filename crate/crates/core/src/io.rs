//! Scenario files and the CSV tables written by experiments.
//!
//! A scenario file is JSON:
//!
//! ```json
//! { "name": "pair", "cells": [[0,0],[1,0]], "buffer_width": 0,
//!   "windows": [ {"id": 0, "cells": [[0,0]], "layer": 1},
//!                {"id": 1, "cells": [[1,0]], "layer": 2} ] }
//! ```
//!
//! Optional keys: `windows` (omit for a bare patch), `rounds`, `links`,
//! `cuts`, `labels`, `distance`, `tile`.
//! Missing labels default to rough top and bottom on the bounding box.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    bounds, BoundaryLabel, CellSet, Link, LogicalCut, MergeScenario, PatchShape, Window, WindowConfig,
};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default = "default_name")]
    pub name: String,
    pub cells: CellSet,
    #[serde(default)]
    pub windows: Vec<Window>,
    #[serde(default)]
    pub buffer_width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<Link>>,
    #[serde(default)]
    pub cuts: Vec<LogicalCut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<crate::geometry::BoundaryLabels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<u32>,
    /// Block size for the two-colouring check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile: Option<u32>,
}

fn default_name() -> String {
    "custom".into()
}

impl ScenarioFile {
    pub fn from_scenario(s: &MergeScenario) -> Self {
        ScenarioFile {
            name: s.name.clone(),
            cells: s.patch.cells.clone(),
            windows: s.config.windows.clone(),
            buffer_width: s.config.buffer_width,
            rounds: Some(s.config.rounds),
            links: Some(s.config.links.clone()),
            cuts: s.cuts.clone(),
            labels: Some(s.patch.labels.clone()),
            distance: Some(s.isolated_distance),
            tile: None,
        }
    }

    pub fn into_scenario(self) -> Result<MergeScenario, Error> {
        let (x0, y0, x1, y1) = bounds(&self.cells).ok_or_else(|| Error::InvalidConfig("patch has no cells".into()))?;
        let labels = match self.labels {
            Some(l) => l,
            None => PatchShape::rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1, BoundaryLabel::Rough).labels,
        };
        // Smallest window side, the natural distance of the layout.
        let distance = self.distance.unwrap_or_else(|| {
            self.windows
                .iter()
                .filter_map(|w| bounds(&w.cells))
                .map(|(a, b, c, d)| (c - a + 1).min(d - b + 1) as u32)
                .min()
                .unwrap_or(0)
        });
        let rounds = self.rounds.unwrap_or(distance.max(1));
        let mut config = WindowConfig::new(self.windows, self.buffer_width, rounds);
        if let Some(links) = self.links {
            config.links = links;
        }
        Ok(MergeScenario {
            name: self.name,
            patch: PatchShape { cells: self.cells, labels },
            config,
            cuts: self.cuts,
            isolated_distance: distance,
        })
    }
}

pub fn parse_scenario(json: &str) -> Result<(MergeScenario, Option<u32>), Error> {
    let f: ScenarioFile = serde_json::from_str(json)?;
    let tile = f.tile;
    Ok((f.into_scenario()?, tile))
}

pub fn load_scenario(path: &Path) -> Result<(MergeScenario, Option<u32>), Error> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

pub fn save_scenario(path: &Path, s: &MergeScenario) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(&ScenarioFile::from_scenario(s))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Writes a CSV table preceded by a `# key=value ...` parameter echo.
pub fn write_csv<T: Serialize>(out: impl Write, header: &str, rows: &[T]) -> Result<(), Error> {
    let mut out = out;
    writeln!(out, "# {header}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_csv`], skipping `#` lines.
pub fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, Error> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LerRow {
    pub decoder: String,
    pub d: u32,
    pub w: u32,
    pub p: f64,
    pub cut: String,
    pub shots: u64,
    pub failures: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Log-log slope across the p grid; empty if fewer than two usable points.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub low_failures: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub graph: String,
    pub d: u32,
    pub w: u32,
    pub p: f64,
    pub link: String,
    pub count: usize,
    pub shots: u64,
    pub frequency: f64,
    pub lambda_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommRow {
    pub d: u32,
    pub mean_defects: f64,
    pub bits_per_defect: u32,
    pub message_bits: u32,
    pub cycles: u32,
    pub ns: f64,
    pub ns_per_round: f64,
}
