//! Grid sweeps over (image, solver, ρ, μ, γ) with per-cell seeds.
//!
//! Config (JSON):
//!
//! ```json
//! {
//!   "images": [{"image": "a.pgm", "importance": "a.attn.json"}],
//!   "solvers": ["ia", "wf-mod"],
//!   "rho_targets": [0.125, 0.25],
//!   "mus": [0.0, 0.05],
//!   "gammas": [1.0],
//!   "master_seed": 7
//! }
//! ```
//!
//! Optional keys: `m_max` (8), `patch_size` (16), `weight_floor`,
//! `baseline` (`{"q", "k", "delta", "delta_sum"}`) and `solver_config`.
//! Relative paths resolve against the config file's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{BaselineParams, Solver, SolverConfig};
use crate::channel::{derive_seed, ChannelSpec};
use crate::error::{IaqError, Result};
use crate::io::{read_image, read_importance};
use crate::model::{ImageTensor, ImportanceMap};
use crate::pipeline::{run_pipeline, RunConfig, RunReport};
use crate::weighting::{WeightParams, DEFAULT_WEIGHT_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepInput {
    pub image: PathBuf,
    pub importance: PathBuf,
}

fn default_m_max() -> u8 {
    8
}

fn default_patch_size() -> usize {
    16
}

fn default_floor() -> f64 {
    DEFAULT_WEIGHT_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub images: Vec<SweepInput>,
    pub solvers: Vec<Solver>,
    pub rho_targets: Vec<f64>,
    pub mus: Vec<f64>,
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_m_max")]
    pub m_max: u8,
    #[serde(default = "default_patch_size")]
    pub patch_size: usize,
    #[serde(default = "default_floor")]
    pub weight_floor: f64,
    #[serde(default)]
    pub baseline: BaselineParams,
    #[serde(default)]
    pub solver_config: SolverConfig,
}

impl SweepConfig {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::parse(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for input in &mut config.images {
            input.image = base.join(&input.image);
            input.importance = base.join(&input.importance);
        }
        Ok(config)
    }

    pub fn n_cells(&self) -> usize {
        self.images.len() * self.solvers.len() * self.rho_targets.len() * self.mus.len() * self.gammas.len()
    }
}

/// One grid point, ordered by its indices in the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    image: usize,
    solver: usize,
    rho: usize,
    mu: usize,
    gamma: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Image path, or `mean` on aggregate rows.
    pub image: String,
    pub solver: Solver,
    pub rho_target: f64,
    pub mu: f64,
    pub gamma: f64,
    /// `ok`, `error` or `aggregate`.
    pub status: String,
    pub seed: Option<u64>,
    /// Images contributing to an aggregate row.
    pub count: Option<usize>,
    pub rho: Option<f64>,
    pub target_bits: Option<f64>,
    pub payload_bits: Option<f64>,
    pub side_info_bits: Option<f64>,
    pub objective: Option<f64>,
    pub mse: Option<f64>,
    pub psnr_db: Option<f64>,
    pub error: Option<String>,
    /// Kept out of the CSV so that reruns compare byte for byte.
    pub wall_time_s: Option<f64>,
}

/// Columns of the sweep CSV, in order.
pub const CSV_COLUMNS: [&str; 16] = [
    "image",
    "solver",
    "rho_target",
    "mu",
    "gamma",
    "status",
    "seed",
    "count",
    "rho",
    "target_bits",
    "payload_bits",
    "side_info_bits",
    "objective",
    "mse",
    "psnr_db",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<SweepRow>,
}

fn row_from_report(image: &str, key: (Solver, f64, f64, f64), seed: u64, r: &RunReport) -> SweepRow {
    SweepRow {
        image: image.to_string(),
        solver: key.0,
        rho_target: key.1,
        mu: key.2,
        gamma: key.3,
        status: "ok".into(),
        seed: Some(seed),
        count: None,
        rho: Some(r.rho),
        target_bits: r.target_bits.map(|b| b as f64),
        payload_bits: Some(r.payload_bits as f64),
        side_info_bits: Some(r.side_info_bits as f64),
        objective: Some(r.objective),
        mse: Some(r.mse),
        psnr_db: r.psnr_db,
        error: None,
        wall_time_s: Some(r.wall_time_s),
    }
}

fn error_row(image: &str, key: (Solver, f64, f64, f64), seed: u64, e: &IaqError) -> SweepRow {
    SweepRow {
        image: image.to_string(),
        solver: key.0,
        rho_target: key.1,
        mu: key.2,
        gamma: key.3,
        status: "error".into(),
        seed: Some(seed),
        count: None,
        rho: None,
        target_bits: None,
        payload_bits: None,
        side_info_bits: None,
        objective: None,
        mse: None,
        psnr_db: None,
        error: Some(format!("{}: {e}", e.kind())),
        wall_time_s: None,
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean over images of every successful cell sharing (solver, ρ, μ, γ).
fn aggregate(rows: &[SweepRow], config: &SweepConfig) -> Vec<SweepRow> {
    let mut out = Vec::new();
    for &solver in &config.solvers {
        for &rho in &config.rho_targets {
            for &mu in &config.mus {
                for &gamma in &config.gammas {
                    let group: Vec<&SweepRow> = rows
                        .iter()
                        .filter(|r| {
                            r.status == "ok"
                                && r.solver == solver
                                && r.rho_target == rho
                                && r.mu == mu
                                && r.gamma == gamma
                        })
                        .collect();
                    let field = |f: fn(&SweepRow) -> Option<f64>| mean(group.iter().map(|r| f(r)));
                    out.push(SweepRow {
                        image: "mean".into(),
                        solver,
                        rho_target: rho,
                        mu,
                        gamma,
                        status: "aggregate".into(),
                        seed: None,
                        count: Some(group.len()),
                        rho: field(|r| r.rho),
                        target_bits: field(|r| r.target_bits),
                        payload_bits: field(|r| r.payload_bits),
                        side_info_bits: field(|r| r.side_info_bits),
                        objective: field(|r| r.objective),
                        mse: field(|r| r.mse),
                        psnr_db: field(|r| r.psnr_db),
                        error: None,
                        wall_time_s: field(|r| r.wall_time_s),
                    });
                }
            }
        }
    }
    out
}

type Loaded = std::result::Result<(ImageTensor, ImportanceMap), String>;

/// Runs every cell of the grid in parallel. Cell failures become error rows.
pub fn sweep(config: &SweepConfig) -> SweepReport {
    let inputs: Vec<Loaded> = config
        .images
        .par_iter()
        .map(|input| {
            let load = || -> Result<(ImageTensor, ImportanceMap)> {
                Ok((read_image(&input.image)?, read_importance(&input.importance)?))
            };
            load().map_err(|e| format!("{}: {e}", e.kind()))
        })
        .collect();

    let mut keys = Vec::with_capacity(config.n_cells());
    for image in 0..config.images.len() {
        for solver in 0..config.solvers.len() {
            for rho in 0..config.rho_targets.len() {
                for mu in 0..config.mus.len() {
                    for gamma in 0..config.gammas.len() {
                        keys.push(CellKey { image, solver, rho, mu, gamma });
                    }
                }
            }
        }
    }

    let mut cells: Vec<(CellKey, SweepRow)> = keys
        .par_iter()
        .enumerate()
        .map(|(index, &key)| {
            let seed = derive_seed(config.master_seed, index as u64);
            let name = config.images[key.image].image.display().to_string();
            let point = (
                config.solvers[key.solver],
                config.rho_targets[key.rho],
                config.mus[key.mu],
                config.gammas[key.gamma],
            );
            let run = || -> Result<RunReport> {
                let (image, map) = inputs[key.image]
                    .as_ref()
                    .map_err(|e| IaqError::InvalidImage(e.clone()))?;
                let run_config = RunConfig {
                    solver: point.0,
                    rho_target: Some(point.1),
                    weights: WeightParams::new(point.3, config.weight_floor)?,
                    m_max: config.m_max,
                    patch_size: config.patch_size,
                    channel: ChannelSpec::new(point.2, seed)?,
                    solver_config: config.solver_config,
                    baseline: config.baseline,
                };
                Ok(run_pipeline(image, map, &run_config)?.report)
            };
            let row = match run() {
                Ok(r) => row_from_report(&name, point, seed, &r),
                Err(e) => error_row(&name, point, seed, &e),
            };
            (key, row)
        })
        .collect();
    cells.sort_by_key(|(key, _)| *key);
    let rows: Vec<SweepRow> = cells.into_iter().map(|(_, row)| row).collect();
    let aggregates = if rows.is_empty() { Vec::new() } else { aggregate(&rows, config) };
    SweepReport { rows, aggregates }
}

fn csv_field<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepReport {
    /// CSV with [`CSV_COLUMNS`]; per-cell rows first, then aggregates.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for r in self.rows.iter().chain(&self.aggregates) {
            w.write_record([
                r.image.clone(),
                r.solver.to_string(),
                r.rho_target.to_string(),
                r.mu.to_string(),
                r.gamma.to_string(),
                r.status.clone(),
                csv_field(r.seed),
                csv_field(r.count),
                csv_field(r.rho),
                csv_field(r.target_bits),
                csv_field(r.payload_bits),
                csv_field(r.side_info_bits),
                csv_field(r.objective),
                csv_field(r.mse),
                csv_field(r.psnr_db),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| IaqError::InvalidParameter(e.to_string()))
    }
}
