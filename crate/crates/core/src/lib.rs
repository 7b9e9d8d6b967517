pub mod codec;
pub mod complexity;
pub mod dyadic;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod quality;
pub mod scalar;
pub mod search;
pub mod synth;
pub mod tensor;
pub mod transform3d;

pub use dyadic::{csd_encode, CsdForm, DyadicRational};
pub use scalar::OpCount;
pub use search::Candidate;
pub use tensor::{i_mode_product, Tensor3};
pub use transform3d::{InversePolicy, TransformKind, TransformPlan, TransformSpec};

/// Exact rational used for approximate-transform arithmetic.
pub type Rational = num_rational::Ratio<i128>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("transform length must be positive, got {0}")]
    InvalidLength(usize),
    #[error("beta = 0 gives a singular matrix")]
    SingularParameter,
    #[error("candidate index {0} is outside 1..=24")]
    InvalidCandidate(u8),
    #[error("correlation coefficient must lie in (0, 1), got {0}")]
    InvalidCorrelation(f64),
    #[error("gram matrix is not invertible")]
    NonInvertibleGram,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unrecognised method or parameter '{0}'")]
    InvalidMethod(String),
    #[error("invalid transform spec: {0}")]
    InvalidSpec(String),
    #[error("exact arithmetic overflow: {0}")]
    Overflow(String),
    #[error("slices are {rows}x{cols}; SSIM needs at least 11x11")]
    SliceTooSmall { rows: usize, cols: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("zigzag training needs at least one block")]
    EmptyTrainingSet,
    #[error("invalid codec configuration: {0}")]
    InvalidConfig(String),
    #[error("stream does not match the decoder configuration: {0}")]
    ConfigMismatch(String),
    #[error("{bpv} bpv at {bit_depth} bits keeps a non-integral number of coefficients")]
    NonIntegralRetention { bpv: f64, bit_depth: u8 },
    #[error("malformed compressed stream: {0}")]
    MalformedStream(String),
    #[error("malformed sidecar {path}: {reason}")]
    MalformedSidecar { path: std::path::PathBuf, reason: String },
    #[error("cannot access {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV output to {path} failed")]
    Csv {
        path: std::path::PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: plot rendering failed: {reason}")]
    Plot { path: std::path::PathBuf, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
