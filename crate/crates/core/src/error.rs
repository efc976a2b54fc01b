use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the simulator can report.
///
/// Variants split into two families: input problems (malformed files, invalid
/// gates, unsupported combinations) and numerical integrity failures that
/// indicate an internal inconsistency. [`Error::is_integrity_failure`] tells
/// them apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{path}: matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { path: String, residual: f64 },

    #[error("{path}: det A != det B (|det A - det B| = {difference:.3e})")]
    DeterminantMismatch { path: String, difference: f64 },

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("gate on qubits ({first}, {second}) is not linear in Majorana operators (weight {weight:.3e} outside the span)")]
    NotLinearizable {
        first: usize,
        second: usize,
        weight: f64,
    },

    #[error("periodic-boundary lowering needs a state of definite parity")]
    IndefiniteParity,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not antisymmetric (residual {residual:.3e})")]
    NotAntisymmetric { residual: f64 },

    #[error("circuit is not number preserving (max |R'| = {max_offdiag:.3e})")]
    NotNumberPreserving { max_offdiag: f64 },

    #[error("result has imaginary residual {imag:.3e} (real part {real:.3e})")]
    ImaginaryResidual { real: f64, imag: f64 },

    #[error("probability {value:.6e} lies outside [-1e-9, 1 + 1e-9]")]
    ProbabilityOutOfRange { value: f64 },

    #[error("periodic boundary conditions are not supported together with product-state inputs")]
    PbcUnsupportedForProductInput,

    #[error("rotated measurement bases are only supported by the sampler")]
    RotatedBasisUnsupported,

    #[error("trace does not match the program: {0}")]
    BranchMismatch(String),

    #[error("conditioning on prefix of probability {probability:.3e}")]
    DegenerateConditional { probability: f64 },

    #[error("dense oracle limited to {limit} qubits, requested {requested}")]
    DimensionGuard { requested: usize, limit: usize },

    #[error("outcome has probability {probability:.3e}, cannot project onto it")]
    ImpossibleOutcome { probability: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures that signal a numerical inconsistency rather than bad
    /// input.
    pub fn is_integrity_failure(&self) -> bool {
        matches!(
            self,
            Error::NotLinearizable { .. }
                | Error::ImaginaryResidual { .. }
                | Error::ProbabilityOutOfRange { .. }
                | Error::DegenerateConditional { .. }
        )
    }

    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            location: location.into(),
            message: message.into(),
        }
    }
}
