//! Compressive-sensing recovery of generalized polynomial chaos expansions,
//! with sparsity enhanced by iteratively identified rotations of the input
//! variables.

pub mod basis;
pub mod benchmarks;
pub mod bpdn;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod presets;
pub mod quadrature;
pub mod rotation;
pub mod sampling;

pub use error::{Error, Result};
pub use exec::Exec;
