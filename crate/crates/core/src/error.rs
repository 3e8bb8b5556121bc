use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VpsError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("wire {wire} out of range for {n_qubits} qubits")]
    WireOutOfRange { wire: usize, n_qubits: usize },

    #[error("gate references parameter slot {slot} but only {available} parameters were supplied")]
    MissingParameter { slot: usize, available: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("qubit count mismatch: expected {expected}, got {got}")]
    QubitMismatch { expected: usize, got: usize },

    #[error("post-selection success probability {prob:e} is below the degenerate threshold")]
    DegenerateProjection { prob: f64 },

    #[error("invalid post-selection: {0}")]
    InvalidPostSelection(String),

    #[error("capacity exceeded: {what} ({size} > {limit})")]
    Capacity {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective evaluation returned a non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for VpsError {
    fn from(e: std::io::Error) -> Self {
        VpsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, VpsError>;
