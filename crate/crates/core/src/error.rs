use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension overflow: {qubits} qubits exceeds the cap of {cap}")]
    DimensionOverflow { qubits: usize, cap: usize },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("operator acts on {found} qubits, expected {expected}")]
    QubitCountMismatch { expected: usize, found: usize },

    #[error("non-finite coefficient {0}")]
    NonFinite(f64),

    #[error("term with phase {0} is not Hermitian")]
    NonHermitianTerm(&'static str),

    #[error("matrix is not Hermitian (error {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (error {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid time slices: {0}")]
    InvalidSlices(String),

    #[error("invalid evolution request: {0}")]
    InvalidRequest(String),

    #[error("invalid cut: {0}")]
    InvalidCut(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("budget infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reflection precondition violated: O^2 deviates from identity by {0:.3e}")]
    NotInvolution(f64),

    #[error("coefficient {0} has no gadget angle (must lie in [0, 1] in magnitude)")]
    CoefficientOutOfRange(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
