//! End-to-end run: allocate, quantize, transmit, dequantize, measure.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocation::{
    allocate, allocate_fixed_q, allocate_sum_threshold, allocate_threshold, allocate_top_k, objective,
    BaselineParams, Solver, SolverConfig,
};
use crate::bitstream::{dequantize_image, quantize_image, Bitstream};
use crate::channel::{transmit, ChannelSpec, RNG_ALGORITHM};
use crate::distortion::DistortionParams;
use crate::error::{IaqError, Result};
use crate::io::{encode_pnm, read_image, read_importance};
use crate::model::{
    compression_ratio, BitAllocation, Budget, ImageTensor, ImportanceMap, PatchPartition,
};
use crate::weighting::{weight_vector, WeightParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub solver: Solver,
    /// Target ρ; optional only for the selection baselines that ignore the budget.
    pub rho_target: Option<f64>,
    pub weights: WeightParams,
    pub m_max: u8,
    pub patch_size: usize,
    pub channel: ChannelSpec,
    pub solver_config: SolverConfig,
    pub baseline: BaselineParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Incremental,
            rho_target: Some(0.25),
            weights: WeightParams::default(),
            m_max: 8,
            patch_size: 16,
            channel: ChannelSpec::noiseless(),
            solver_config: SolverConfig::default(),
            baseline: BaselineParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: Solver,
    pub rho_target: Option<f64>,
    /// ρ of the transmitted allocation.
    pub rho: f64,
    pub target_bits: Option<u64>,
    /// B, payload bits.
    pub payload_bits: u64,
    /// B_add.
    pub side_info_bits: u64,
    /// Σ w_i·D(2^{M_i}; μ) at the channel's flip probability.
    pub objective: f64,
    pub mse: f64,
    /// Peak signal is the pixel range of the input; `None` for a lossless run.
    pub psnr_db: Option<f64>,
    pub mu: f64,
    pub gamma: f64,
    pub weight_floor: f64,
    pub seed: u64,
    pub rng: String,
    pub m_max: u8,
    pub patch_size: usize,
    /// P²C.
    pub pixels_per_patch: usize,
    /// Patch grid (rows, cols).
    pub grid: [usize; 2],
    pub bits: Vec<u8>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn allocation(&self) -> BitAllocation {
        BitAllocation::new(self.bits.clone(), self.pixels_per_patch)
    }

    pub fn level_map(&self) -> LevelMap {
        LevelMap {
            grid: self.grid,
            m_max: self.m_max,
            bits: self.bits.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    /// Stream as sent, before the channel.
    pub sent: Bitstream,
    pub reconstruction: ImageTensor,
}

fn mean_squared_error(a: &ImageTensor, b: &ImageTensor) -> f64 {
    let total: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    total / a.len() as f64
}

/// Seconds since the call; always 0 on `wasm32-unknown-unknown`, which has no clock.
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
fn stopwatch() -> impl FnOnce() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
fn stopwatch() -> impl FnOnce() -> f64 {
    || 0.0
}

fn psnr(mse: f64, peak: f64) -> Option<f64> {
    (mse > 0.0 && peak > 0.0).then(|| 10.0 * (peak * peak / mse).log10())
}

/// Allocation for `config` on an image with the given partition and range.
pub fn plan(
    map: &ImportanceMap,
    partition: &PatchPartition,
    range: f64,
    config: &RunConfig,
) -> Result<(BitAllocation, Option<Budget>, Vec<f64>)> {
    map.check(partition)?;
    let weights = weight_vector(map, &config.weights);
    let ppp = partition.pixels_per_patch();
    let params = DistortionParams::new(ppp, range, config.channel.flip_probability)?;
    let budget = config
        .rho_target
        .map(|rho| Budget::from_ratio(rho, config.m_max, partition))
        .transpose()?;
    let allocation = match (&budget, config.solver) {
        (Some(b), solver) => allocate(
            solver,
            map.scores(),
            &weights,
            b,
            &params,
            &config.solver_config,
            &config.baseline,
        )?,
        (None, solver) => {
            let missing = |name: &str| {
                IaqError::InvalidParameter(format!("solver {solver} needs --{name}"))
            };
            let b = &config.baseline;
            match solver {
                Solver::TopK => {
                    allocate_top_k(map.scores(), b.k.ok_or_else(|| missing("k"))?, config.m_max, ppp)?
                }
                Solver::Threshold => allocate_threshold(
                    map.scores(),
                    b.delta.ok_or_else(|| missing("delta"))?,
                    config.m_max,
                    ppp,
                )?,
                Solver::SumThreshold => allocate_sum_threshold(
                    map.scores(),
                    b.delta_sum.ok_or_else(|| missing("delta-sum"))?,
                    config.m_max,
                    ppp,
                )?,
                Solver::FixedQ if b.q.is_some() => {
                    let q = b.q.unwrap_or_default();
                    if !q.is_power_of_two() || q.trailing_zeros() > u32::from(config.m_max) {
                        return Err(IaqError::InvalidParameter(format!(
                            "fixed-q level count {q} must be a power of two at most 2^M_max"
                        )));
                    }
                    allocate_fixed_q(partition.n_patches(), q.trailing_zeros() as u8, ppp)
                }
                _ => {
                    return Err(IaqError::InvalidBudget(format!(
                        "solver {solver} needs a ρ target"
                    )))
                }
            }
        }
    };
    Ok((allocation, budget, weights))
}

/// Runs the full pipeline on in-memory inputs.
pub fn run_pipeline(image: &ImageTensor, map: &ImportanceMap, config: &RunConfig) -> Result<RunOutput> {
    let elapsed = stopwatch();
    let partition = PatchPartition::of(image, config.patch_size)?;
    let (u_min, u_max) = image.pixel_range()?;
    let range = f64::from(u_max) - f64::from(u_min);
    let (allocation, budget, weights) = plan(map, &partition, range, config)?;

    let params = DistortionParams::new(partition.pixels_per_patch(), range, config.channel.flip_probability)?;
    let sent = quantize_image(image, &allocation, &partition, config.m_max)?;
    let mut received = sent.clone();
    received.payload = transmit(&sent.payload, &config.channel);
    let reconstruction = dequantize_image(&received)?;
    let mse = mean_squared_error(image, &reconstruction);

    let report = RunReport {
        solver: config.solver,
        rho_target: config.rho_target,
        rho: compression_ratio(&allocation, &partition),
        target_bits: budget.map(|b| b.target_bits),
        payload_bits: allocation.payload_bits(),
        side_info_bits: crate::model::side_info_bits(partition.n_patches(), config.m_max),
        objective: objective(&allocation.bits, &weights, &params),
        mse,
        psnr_db: psnr(mse, range),
        mu: config.channel.flip_probability,
        gamma: config.weights.gamma,
        weight_floor: config.weights.floor,
        seed: config.channel.seed,
        rng: RNG_ALGORITHM.to_string(),
        m_max: config.m_max,
        patch_size: config.patch_size,
        pixels_per_patch: partition.pixels_per_patch(),
        grid: [partition.grid_rows(), partition.grid_cols()],
        bits: allocation.bits,
        wall_time_s: elapsed(),
    };
    Ok(RunOutput {
        report,
        sent,
        reconstruction,
    })
}

/// Reads an image and its importance map from disk and runs the pipeline.
pub fn run_once(image: impl AsRef<Path>, importance: impl AsRef<Path>, config: &RunConfig) -> Result<RunReport> {
    let image = read_image(image)?;
    let map = read_importance(importance)?;
    Ok(run_pipeline(&image, &map, config)?.report)
}

/// Per-patch bit depths on the patch grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelMap {
    pub grid: [usize; 2],
    pub m_max: u8,
    pub bits: Vec<u8>,
}

impl LevelMap {
    /// One gray pixel per patch, value `M_i·255/M_max` rounded.
    pub fn to_image(&self) -> Result<ImageTensor> {
        let [rows, cols] = self.grid;
        if rows * cols != self.bits.len() {
            return Err(IaqError::GeometryMismatch(format!(
                "grid {rows}x{cols} does not hold {} depths",
                self.bits.len()
            )));
        }
        let scale = if self.m_max == 0 { 0.0 } else { 255.0 / f64::from(self.m_max) };
        let px = self
            .bits
            .iter()
            .map(|&m| (f64::from(m) * scale).round() as f32)
            .collect();
        ImageTensor::new(rows, cols, 1, px)
    }
}

/// Writes the level map of `report` next to `path` as `<stem>.json` and `<stem>.pgm`.
pub fn emit_level_map(report: &RunReport, path: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let map = report.level_map();
    let json = path.as_ref().with_extension("json");
    let pgm = path.as_ref().with_extension("pgm");
    let image = map.to_image()?;
    fs::write(&json, serde_json::to_string_pretty(&map)?)?;
    fs::write(&pgm, encode_pnm(&image)?)?;
    Ok((json, pgm))
}
