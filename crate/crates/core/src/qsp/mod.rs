//! Qubitization and quantum signal processing at desk scale.

pub mod bessel;
pub mod encode;
pub mod signal;

pub use bessel::{bessel_j, bessel_j_all};
pub use encode::{
    build_qubiterate, encode_lcu, encode_lcu_gadget, reflection_gadget, EncodingCheck, Qubiterate, SectorPhases,
    StandardFormEncoding, ENCODING_TOL,
};
pub use signal::{
    bessel_tail, jacobi_anger, jacobi_anger_bound, transfer_function, JacobiAngerTruncation, PhaseSequence,
};
