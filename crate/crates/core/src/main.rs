use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use iaq::allocation::{AdjustOrder, BaselineParams, Solver, SolverConfig};
use iaq::bitstream::{dequantize_image, quantize_image, Bitstream};
use iaq::channel::{ber_from_snr, transmit, ChannelSpec, Modulation};
use iaq::error::{IaqError, Result};
use iaq::io::{read_image, read_importance, write_image};
use iaq::model::{compression_ratio, side_info_bits, BitAllocation, PatchPartition};
use iaq::pipeline::{emit_level_map, plan, run_pipeline, RunConfig, RunReport};
use iaq::sweep::{sweep, SweepConfig};
use iaq::weighting::{WeightParams, DEFAULT_WEIGHT_FLOOR};

#[derive(Parser)]
#[command(name = "iaq", version, about = "Importance-aware patch quantization over a binary symmetric channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-patch bit depths and print them as JSON.
    Allocate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Write the allocation here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantize an image into an IAQB container.
    Encode {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Use depths from an `allocate` output instead of running a solver.
        #[arg(long)]
        allocation: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pass the payload of a container through a binary symmetric channel.
    Transmit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        channel: ChannelArgs,
    },
    /// Reconstruct an image from a container.
    Decode {
        #[arg(long)]
        input: PathBuf,
        /// `.pgm`/`.ppm` write 8-bit PNM, anything else a raw f32 tensor.
        #[arg(long)]
        out: PathBuf,
    },
    /// Allocate, quantize, transmit and decode; print the run report.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the reconstruction here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the level map as `<path>.json` and `<path>.pgm`.
        #[arg(long)]
        level_map: Option<PathBuf>,
    },
    /// Run a grid of experiments described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Full report including wall times.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render the level map of a run report as JSON and PGM.
    Levelmap {
        #[arg(long)]
        report: PathBuf,
        /// Output stem; `.json` and `.pgm` are appended.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Inputs {
    /// PGM/PPM or raw IAQT tensor.
    #[arg(long)]
    image: PathBuf,
    /// Importance-map JSON.
    #[arg(long)]
    importance: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "ia")]
    solver: Solver,
    /// Target compression ratio ρ; B_target = ⌊ρ·8HWC⌋.
    #[arg(long)]
    rho_target: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_WEIGHT_FLOOR)]
    weight_floor: f64,
    #[arg(long, default_value_t = 8)]
    m_max: u8,
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    /// fixed-q level count (power of two).
    #[arg(long)]
    q: Option<u32>,
    /// top-k percentage.
    #[arg(long)]
    k: Option<f64>,
    /// at threshold.
    #[arg(long)]
    delta: Option<f64>,
    /// ast cumulative threshold.
    #[arg(long)]
    delta_sum: Option<f64>,
    /// wf-mod bisection steps.
    #[arg(long, default_value_t = 10)]
    s_max: usize,
    /// wf-mod Newton steps per bisection step.
    #[arg(long, default_value_t = 5)]
    t_max: usize,
    /// wf/wf-mod rounding repair: `gain` (weighted marginal gain) or `score` (attention order).
    #[arg(long, default_value = "gain")]
    adjust: AdjustOrder,
}

#[derive(Args)]
struct ChannelArgs {
    /// Bit flip probability μ.
    #[arg(long, conflicts_with = "snr_db")]
    mu: Option<f64>,
    /// Derive μ from an SNR in dB instead.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, default_value = "bpsk-awgn")]
    scheme: Modulation,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ChannelArgs {
    fn spec(&self) -> Result<ChannelSpec> {
        let mu = match (self.mu, self.snr_db) {
            (Some(mu), _) => mu,
            (None, Some(snr)) => ber_from_snr(snr, self.scheme),
            (None, None) => 0.0,
        };
        ChannelSpec::new(mu, self.seed)
    }
}

impl SolverArgs {
    fn config(&self, channel: ChannelSpec) -> Result<RunConfig> {
        let rho_target = match self.rho_target {
            None if !self.solver.ignores_budget() && !(self.solver == Solver::FixedQ && self.q.is_some()) => {
                return Err(IaqError::InvalidBudget(format!(
                    "solver {} needs --rho-target",
                    self.solver
                )))
            }
            rho => rho,
        };
        let solver_config = SolverConfig {
            max_bisections: self.s_max,
            max_newton: self.t_max,
            adjust: self.adjust,
            ..SolverConfig::default()
        };
        solver_config.validate()?;
        Ok(RunConfig {
            solver: self.solver,
            rho_target,
            weights: WeightParams::new(self.gamma, self.weight_floor)?,
            m_max: self.m_max,
            patch_size: self.patch_size,
            channel,
            solver_config,
            baseline: BaselineParams {
                q: self.q,
                k: self.k,
                delta: self.delta,
                delta_sum: self.delta_sum,
            },
        })
    }
}

/// Output of `allocate`, accepted by `encode --allocation`.
#[derive(Serialize, Deserialize)]
struct AllocationFile {
    solver: Solver,
    grid: [usize; 2],
    m_max: u8,
    pixels_per_patch: usize,
    target_bits: Option<u64>,
    payload_bits: u64,
    side_info_bits: u64,
    rho: f64,
    bits: Vec<u8>,
}

fn compute_allocation(inputs: &Inputs, config: &RunConfig) -> Result<(AllocationFile, iaq::ImageTensor)> {
    let image = read_image(&inputs.image)?;
    let map = read_importance(&inputs.importance)?;
    let partition = PatchPartition::of(&image, config.patch_size)?;
    let (lo, hi) = image.pixel_range()?;
    let (allocation, budget, _) = plan(&map, &partition, f64::from(hi) - f64::from(lo), config)?;
    let file = AllocationFile {
        solver: config.solver,
        grid: [partition.grid_rows(), partition.grid_cols()],
        m_max: config.m_max,
        pixels_per_patch: partition.pixels_per_patch(),
        target_bits: budget.map(|b| b.target_bits),
        payload_bits: allocation.payload_bits(),
        side_info_bits: side_info_bits(partition.n_patches(), config.m_max),
        rho: compression_ratio(&allocation, &partition),
        bits: allocation.bits,
    };
    Ok((file, image))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Allocate {
            inputs,
            solver,
            channel,
            out,
        } => {
            let config = solver.config(channel.spec()?)?;
            let (file, _) = compute_allocation(&inputs, &config)?;
            match out {
                Some(path) => fs::write(path, serde_json::to_string_pretty(&file)?)?,
                None => print_json(&file)?,
            }
        }
        Command::Encode {
            inputs,
            solver,
            channel,
            allocation,
            out,
        } => {
            let (bits, image, m_max, patch_size) = match allocation {
                Some(path) => {
                    let file: AllocationFile = serde_json::from_str(&fs::read_to_string(path)?)?;
                    let image = read_image(&inputs.image)?;
                    (file.bits, image, file.m_max, solver.patch_size)
                }
                None => {
                    let config = solver.config(channel.spec()?)?;
                    let (file, image) = compute_allocation(&inputs, &config)?;
                    (file.bits, image, config.m_max, config.patch_size)
                }
            };
            let partition = PatchPartition::of(&image, patch_size)?;
            let allocation = BitAllocation::new(bits, partition.pixels_per_patch());
            let stream = quantize_image(&image, &allocation, &partition, m_max)?;
            fs::write(out, stream.to_bytes()?)?;
        }
        Command::Transmit {
            input,
            out,
            channel,
        } => {
            let mut stream = Bitstream::from_bytes(&fs::read(input)?)?;
            stream.payload = transmit(&stream.payload, &channel.spec()?);
            fs::write(out, stream.to_bytes()?)?;
        }
        Command::Decode { input, out } => {
            let stream = Bitstream::from_bytes(&fs::read(input)?)?;
            write_image(out, &dequantize_image(&stream)?)?;
        }
        Command::Run {
            inputs,
            solver,
            channel,
            report,
            out,
            level_map,
        } => {
            let config = solver.config(channel.spec()?)?;
            let image = read_image(&inputs.image)?;
            let map = read_importance(&inputs.importance)?;
            let result = run_pipeline(&image, &map, &config)?;
            if let Some(path) = out {
                write_image(path, &result.reconstruction)?;
            }
            if let Some(path) = level_map {
                emit_level_map(&result.report, path)?;
            }
            if let Some(path) = report {
                fs::write(path, serde_json::to_string_pretty(&result.report)?)?;
            }
            print_json(&result.report)?;
        }
        Command::Sweep { config, csv, json } => {
            let config = SweepConfig::read(config)?;
            let report = sweep(&config);
            report.write_csv(fs::File::create(csv)?)?;
            if let Some(path) = json {
                fs::write(path, serde_json::to_string_pretty(&report)?)?;
            }
        }
        Command::Levelmap { report, out } => {
            let report: RunReport = serde_json::from_str(&fs::read_to_string(report)?)?;
            emit_level_map(&report, out)?;
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
