use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("ensemble fails moment constraints: {0}")]
    InvalidEnsemble(String),

    #[error("explicit sequence is not injective: value {value} repeated at positions {first} and {second}")]
    NotInjective { value: u64, first: usize, second: usize },

    #[error("no closed-form overlap profile registered for the pair ({0}, {1})")]
    NoClosedForm(String, String),

    #[error("unknown sequence label `{0}`")]
    UnknownSequence(String),

    #[error("duplicate index {0} in submatrix index set")]
    DuplicateIndex(u64),

    #[error("Hermitian trace residue {residue:e} exceeds tolerance {tolerance:e}")]
    HermitianResidue { residue: f64, tolerance: f64 },

    #[error("pole lies on or outside the integration contour: {0}")]
    PoleOnContour(String),

    #[error("point {0} is not in the open upper half-plane")]
    NotInUpperHalfPlane(String),

    #[error("duplicate grid points at indices {0} and {1}")]
    DuplicatePoint(usize, usize),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("invalid experiment: {0}")]
    InvalidSpec(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::HermitianResidue { .. } | Error::ContractViolation(_) => 3,
            _ => 1,
        }
    }
}
