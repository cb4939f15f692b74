//! Importance-aware quantization for patch-based image transmission.
//!
//! An image is split into P×P patches. Each patch gets its own uniform
//! quantizer depth M_i, chosen to minimize the importance-weighted expected
//! distortion under a total bit budget, optionally accounting for bit flips
//! on a binary symmetric channel.

pub mod allocation;
pub mod bitstream;
pub mod channel;
pub mod distortion;
pub mod error;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod quantizer;
pub mod sweep;
pub mod weighting;

pub use allocation::{allocate, BaselineParams, Solver, SolverConfig};
pub use bitstream::{dequantize_image, quantize_image, Bitstream};
pub use channel::{transmit, ChannelSpec};
pub use distortion::DistortionParams;
pub use error::{IaqError, Result};
pub use model::{BitAllocation, Budget, ImageTensor, ImportanceMap, PatchPartition};
pub use pipeline::{run_once, run_pipeline, RunConfig, RunReport};
pub use weighting::WeightParams;
