use iaq::allocation::{allocate, BaselineParams, Solver, SolverConfig};
use iaq::channel::ChannelSpec;
use iaq::distortion::DistortionParams;
use iaq::model::{compression_ratio, Budget, ImageTensor, ImportanceMap, PatchPartition};
use iaq::pipeline::{run_pipeline, RunConfig};
use iaq::weighting::{weight_vector, WeightParams};
use iaq::Result;

/// Scene side in pixels; 14×14 patches of 16×16.
pub const SIDE: usize = 224;
const PATCH: usize = 16;
const GRID: usize = SIDE / PATCH;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub rho: f64,
    pub gamma: f64,
    pub mu: f64,
    pub solver: Solver,
    /// Object center in patch units.
    pub center: (f64, f64),
    /// Object radius in patch units.
    pub spread: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub bits: Vec<u8>,
    pub rho: f64,
    pub objective: f64,
    pub payload_bits: u64,
}

fn blob(params: &SceneParams, r: f64, c: f64) -> f64 {
    let (cx, cy) = params.center;
    let s = params.spread.max(0.25);
    (-((c - cx).powi(2) + (r - cy).powi(2)) / (2.0 * s * s)).exp()
}

/// Gray scene: a bright object on a striped background.
pub fn scene_image(params: &SceneParams) -> ImageTensor {
    let mut px = Vec::with_capacity(SIDE * SIDE);
    for r in 0..SIDE {
        for c in 0..SIDE {
            let (pr, pc) = (r as f64 / PATCH as f64, c as f64 / PATCH as f64);
            let stripes = 60.0 + 25.0 * (r as f64 / 9.0).sin() * (c as f64 / 13.0).cos();
            let v = stripes + 170.0 * blob(params, pr - 0.5, pc - 0.5);
            px.push(v.clamp(0.0, 255.0) as f32);
        }
    }
    ImageTensor::new(SIDE, SIDE, 1, px).expect("fixed geometry")
}

/// Importance concentrated on the object.
pub fn scene_importance(params: &SceneParams) -> ImportanceMap {
    let scores = (0..GRID * GRID)
        .map(|p| blob(params, (p / GRID) as f64, (p % GRID) as f64) + 1e-3)
        .collect();
    ImportanceMap::new(GRID, GRID, scores).expect("positive scores")
}

fn run_config(params: &SceneParams) -> Result<RunConfig> {
    Ok(RunConfig {
        solver: params.solver,
        rho_target: Some(params.rho),
        weights: WeightParams::with_gamma(params.gamma)?,
        channel: ChannelSpec::new(params.mu, params.seed)?,
        baseline: BaselineParams {
            k: Some(30.0),
            delta: Some(1.0 / (GRID * GRID) as f64),
            delta_sum: Some(0.5),
            q: None,
        },
        ..RunConfig::default()
    })
}

pub fn plan(params: &SceneParams) -> Result<Plan> {
    let config = run_config(params)?;
    let partition = PatchPartition::new(SIDE, SIDE, 1, PATCH)?;
    let map = scene_importance(params);
    let weights = weight_vector(&map, &config.weights);
    let dist = DistortionParams::new(partition.pixels_per_patch(), 255.0, params.mu)?;
    let budget = Budget::from_ratio(params.rho, config.m_max, &partition)?;
    let allocation = allocate(
        params.solver,
        map.scores(),
        &weights,
        &budget,
        &dist,
        &SolverConfig::default(),
        &config.baseline,
    )?;
    Ok(Plan {
        rho: compression_ratio(&allocation, &partition),
        objective: iaq::allocation::objective(&allocation.bits, &weights, &dist),
        payload_bits: allocation.payload_bits(),
        bits: allocation.bits,
    })
}

pub fn distortion_curve(mu: f64) -> Result<Vec<f64>> {
    let p = DistortionParams::new(1, 1.0, mu)?;
    Ok((0..=8).map(|m| p.at_bits(m) / p.d0()).collect())
}

fn rgba(image: &ImageTensor) -> Vec<u8> {
    image
        .pixels()
        .iter()
        .flat_map(|&v| {
            let g = v.round().clamp(0.0, 255.0) as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// RGBA of the original scene and of its reconstruction after the channel.
pub fn transmit_scene(params: &SceneParams) -> Result<(Vec<u8>, Vec<u8>)> {
    let image = scene_image(params);
    let out = run_pipeline(&image, &scene_importance(params), &run_config(params)?)?;
    Ok((rgba(&image), rgba(&out.reconstruction)))
}
