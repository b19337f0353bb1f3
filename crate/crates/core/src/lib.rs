//! Numerical kernels for intrinsic Lipschitz graphs in the Heisenberg group.

pub mod bumpy;
pub mod checks;
pub mod corona;
pub mod embed;
pub mod error;
pub mod field;
pub mod heis;
pub mod nonmono;
pub mod vper;
pub mod word;

pub use error::{Error, Result};
