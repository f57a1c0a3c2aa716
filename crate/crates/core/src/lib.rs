//! Quantum jump codes: error correction for spontaneous emission with known
//! jump positions, together with the state, dynamics and gate machinery they need.

pub mod codes;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod gates;
pub mod linalg;
pub mod qec;
pub mod qstate;

pub use error::{Error, Result};
