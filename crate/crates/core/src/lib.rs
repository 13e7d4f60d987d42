//! Lieb-Robinson block decompositions of lattice time evolution.

pub mod bounds;
pub mod cheb;
pub mod error;
pub mod estimate;
pub mod fit;
pub mod lattice;
pub mod operator;
pub mod oracle;
pub mod planner;
pub mod qsp;
mod sector;

pub use error::{Error, Result};
pub use faer::c64;
