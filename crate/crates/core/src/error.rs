use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis label {0:?}: expected a non-empty string of 0/1")]
    InvalidLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("qubit {qubit} outside 1..={n_qubits}")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("support {0:?} contains repeated qubits")]
    RepeatedQubit(Vec<usize>),
    #[error("{n_qubits} qubits exceed the dense limit of {limit}")]
    TooManyQubits { n_qubits: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("jump codes need an even number of qubits, got {0}")]
    OddQubitCount(usize),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("operator leaks out of the subspace: residual {residual:e} > {tol:e}")]
    Leakage { residual: f64, tol: f64 },
    #[error("Knill-Laflamme condition fails: residual {residual:e}")]
    NotCorrectable { residual: f64 },
    #[error("jump image of codeword {0} vanishes")]
    DegenerateImage(usize),
    #[error("the no-jump Kraus family is defined for a vanishing coherent Hamiltonian")]
    CoherentDynamics,
    #[error("zero-rank projector")]
    ZeroRank,
    #[error("target error {target:e} not reached, best achieved {achieved:e}")]
    Unreachable { target: f64, achieved: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
