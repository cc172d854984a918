//! CSV exports and run metadata. Every table carries a `schema_version`
//! column; files are written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::Sweep;
use crate::env::{DailyRecord, RewardScaling};
use crate::error::{Error, Result};
use crate::pareto::Point;
use crate::pcn::{CoverageSet, LogRow, RobustnessReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Header-only output for empty tables, so consumers still see the schema.
fn to_csv_or_header<T: Serialize>(rows: Vec<T>, header: &[&str]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        return w.into_inner().map_err(|e| Error::Io(e.into_error()));
    }
    to_csv(rows)
}

#[derive(Serialize)]
struct CoverageRow {
    schema_version: u32,
    policy_id: usize,
    desired_return_0: f64,
    desired_return_1: f64,
    desired_horizon: f64,
    achieved_return_0: f64,
    achieved_return_1: f64,
}

/// Coverage set in raw reward units.
pub fn coverage_csv(cs: &CoverageSet, scaling: &RewardScaling) -> Result<Vec<u8>> {
    let rows: Vec<CoverageRow> = cs
        .points
        .iter()
        .map(|p| {
            let d = scaling.unscale(p.desired_return);
            let a = scaling.unscale(p.achieved_return);
            CoverageRow {
                schema_version: SCHEMA_VERSION,
                policy_id: p.policy_id,
                desired_return_0: d[0],
                desired_return_1: d[1],
                desired_horizon: p.desired_horizon,
                achieved_return_0: a[0],
                achieved_return_1: a[1],
            }
        })
        .collect();
    to_csv_or_header(
        rows,
        &[
            "schema_version",
            "policy_id",
            "desired_return_0",
            "desired_return_1",
            "desired_horizon",
            "achieved_return_0",
            "achieved_return_1",
        ],
    )
}

#[derive(Serialize)]
struct LogCsvRow {
    schema_version: u32,
    iteration: usize,
    steps: usize,
    episodes: usize,
    buffer_size: usize,
    hypervolume: f64,
    loss: f64,
}

pub fn training_log_csv(log: &[LogRow]) -> Result<Vec<u8>> {
    let rows: Vec<LogCsvRow> = log
        .iter()
        .map(|r| LogCsvRow {
            schema_version: SCHEMA_VERSION,
            iteration: r.iteration,
            steps: r.steps,
            episodes: r.episodes,
            buffer_size: r.buffer_size,
            hypervolume: r.hypervolume,
            loss: r.loss,
        })
        .collect();
    to_csv_or_header(rows, &["schema_version", "iteration", "steps", "episodes", "buffer_size", "hypervolume", "loss"])
}

#[derive(Serialize)]
struct BaselineRow {
    schema_version: u32,
    level: f64,
    return_0: f64,
    return_1: f64,
    nondominated: bool,
}

/// Baseline sweep in raw reward units.
pub fn baseline_csv(sweep: &Sweep) -> Result<Vec<u8>> {
    to_csv(sweep.points.iter().map(|p| BaselineRow {
        schema_version: SCHEMA_VERSION,
        level: p.level,
        return_0: p.raw_return[0],
        return_1: p.raw_return[1],
        nondominated: p.nondominated,
    }))
}

#[derive(Serialize)]
struct RobustnessCsvRow {
    schema_version: u32,
    policy_id: usize,
    desired_return_0: f64,
    desired_return_1: f64,
    achieved_mean_0: f64,
    achieved_mean_1: f64,
    achieved_std_0: f64,
    achieved_std_1: f64,
}

/// Per-policy robustness rows in raw units.
pub fn robustness_csv(report: &RobustnessReport, scaling: &RewardScaling) -> Result<Vec<u8>> {
    let d = scaling.divisors();
    to_csv(report.rows.iter().map(|r| {
        let des = scaling.unscale(r.desired_return);
        let ach = scaling.unscale(r.achieved_mean);
        RobustnessCsvRow {
            schema_version: SCHEMA_VERSION,
            policy_id: r.policy_id,
            desired_return_0: des[0],
            desired_return_1: des[1],
            achieved_mean_0: ach[0],
            achieved_mean_1: ach[1],
            achieved_std_0: r.achieved_std[0] * d[0],
            achieved_std_1: r.achieved_std[1] * d[1],
        }
    }))
}

#[derive(Serialize)]
struct DailyRow<'a> {
    schema_version: u32,
    policy_id: &'a str,
    date: String,
    hosp_new: f64,
    icu_new: f64,
    deaths_new: f64,
    p_w: f64,
    p_s: f64,
    p_l: f64,
}

/// Daily trajectories of several policies, one block per label.
pub fn daily_csv(runs: &[(String, Vec<DailyRecord>)]) -> Result<Vec<u8>> {
    to_csv(runs.iter().flat_map(|(label, days)| {
        days.iter().map(move |d| DailyRow {
            schema_version: SCHEMA_VERSION,
            policy_id: label,
            date: d.date.format("%Y-%m-%d").to_string(),
            hosp_new: d.hosp_new,
            icu_new: d.icu_new,
            deaths_new: d.deaths_new,
            p_w: d.action.p_w,
            p_s: d.action.p_s,
            p_l: d.action.p_l,
        })
    }))
}

/// One line of a metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub schema_version: u32,
    pub set: String,
    pub points: usize,
    pub hypervolume: f64,
    pub epsilon: Option<f64>,
    pub epsilon_mean: Option<f64>,
}

pub fn metrics_csv(rows: &[MetricRow]) -> Result<Vec<u8>> {
    to_csv(rows)
}

/// Reads 2-D points from a CSV with a header. Columns are picked in this
/// order: `achieved_return_0/1`, `return_0/1`, `x/y`.
pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let cols = [("achieved_return_0", "achieved_return_1"), ("return_0", "return_1"), ("x", "y")]
        .iter()
        .find_map(|(a, b)| Some((find(a)?, find(b)?)))
        .ok_or_else(|| {
            Error::InvalidInput(format!("{}: no achieved_return_0/1, return_0/1 or x/y columns", path.display()))
        })?;
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            let v = rec.get(i).unwrap_or("").trim();
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("{} row {}: bad number {v:?}", path.display(), line + 2)))
        };
        points.push([get(cols.0)?, get(cols.1)?]);
    }
    Ok(points)
}

/// A coverage-set row read back from [`coverage_csv`] output.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CoverageRecord {
    pub policy_id: usize,
    pub desired_return_0: f64,
    pub desired_return_1: f64,
    pub desired_horizon: f64,
    pub achieved_return_0: f64,
    pub achieved_return_1: f64,
}

pub fn read_coverage(path: &Path) -> Result<Vec<CoverageRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<CoverageRecord>, _>>()?;
    Ok(rows)
}

/// Everything needed to rerun the command that produced an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub code_version: String,
    /// TOML snapshot of the resolved configuration.
    pub config: String,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, config: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, toml::to_string(self)?.as_bytes())
    }
}
