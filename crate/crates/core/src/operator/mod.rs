//! Pauli-string operators and the dense linear algebra behind them.

pub mod dense;
pub mod krylov;
pub mod pauli;

pub use dense::{
    apply_local, apply_local_vec, commutator_norm, embed_local, embed_sites, hermiticity_error, materialize,
    matrix_exponential_hermitian, operator_norm, spectral_norm, svd_norm, CMat, DenseUnitary, HermitianEigen,
    MAX_QUBITS,
};
pub use krylov::{largest_singular_value, LinearOperator};
pub use pauli::{OperatorSum, Pauli, PauliString, Phase};
