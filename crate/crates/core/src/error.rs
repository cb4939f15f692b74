use thiserror::Error;

pub type Result<T> = std::result::Result<T, IaqError>;

#[derive(Debug, Error)]
pub enum IaqError {
    #[error("{axis} of {size} pixels is not divisible by patch size {patch_size}")]
    DimensionNotDivisible {
        axis: &'static str,
        size: usize,
        patch_size: usize,
    },

    #[error("image has no pixels")]
    EmptyImage,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid importance map: {0}")]
    InvalidImportanceMap(String),

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("index {index} does not fit in {bits} bits")]
    IndexOutOfRange { index: u32, bits: u8 },

    #[error("expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("truncated stream: {0}")]
    TruncatedStream(String),

    #[error("invalid stream: {0}")]
    InvalidStream(String),

    #[error("flip probability {mu} outside the supported regime (must be below {limit})")]
    RegimeViolation { mu: f64, limit: f64 },

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("unsupported modulation scheme `{0}`")]
    UnsupportedScheme(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl IaqError {
    /// Stable machine-readable identifier, used by the CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            IaqError::DimensionNotDivisible { .. } => "dimension_not_divisible",
            IaqError::EmptyImage => "empty_image",
            IaqError::InvalidImage(_) => "invalid_image",
            IaqError::InvalidImportanceMap(_) => "invalid_importance_map",
            IaqError::InvalidBudget(_) => "invalid_budget",
            IaqError::InvalidParameter(_) => "invalid_parameter",
            IaqError::GeometryMismatch(_) => "geometry_mismatch",
            IaqError::IndexOutOfRange { .. } => "index_out_of_range",
            IaqError::LengthMismatch { .. } => "length_mismatch",
            IaqError::TruncatedStream(_) => "truncated_stream",
            IaqError::InvalidStream(_) => "invalid_stream",
            IaqError::RegimeViolation { .. } => "regime_violation",
            IaqError::InstanceTooLarge(_) => "instance_too_large",
            IaqError::UnsupportedScheme(_) => "unsupported_scheme",
            IaqError::Io(_) => "io",
            IaqError::Json(_) => "json",
            IaqError::Csv(_) => "csv",
        }
    }
}
