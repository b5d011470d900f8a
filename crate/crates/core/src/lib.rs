//! Spectral localizer toolkit.
//!
//! Builds the spectral localizer of an even invertible `H` and an odd Dirac
//! operator `D` on a finite graded space, certifies its invertibility through
//! explicit admissibility constants, and reads off index pairings as
//! half-signatures. Independent oracles (graded kernel counts, compressions,
//! lattice Chern numbers) cross-check the integers.

pub mod error;
pub mod ktheory;
pub mod linalg;
pub mod localizer;
pub mod localizing;
pub mod models;
pub mod operator;
pub mod oracle;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use localizing::{
    default_localizer, validate_localizing, LocalizingFunction, QuadratureSettings,
};
pub use operator::{GradedOperator, GradedSpace, Parity, SpectralDecomposition, Tolerances};
