use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit ring")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("qubits {0} and {1} are not cyclic neighbours")]
    NonAdjacent(usize, usize),
    #[error("expected a {expected}x{expected} gate, got {got}x{got}")]
    GateShape { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal residue {residue:e})")]
    SvdNotConverged { sweeps: usize, residue: f64 },
    #[error("{0}")]
    Data(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
