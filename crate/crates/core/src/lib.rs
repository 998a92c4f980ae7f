//! Computable Λ-limits: hyperreals over a lazily decided free ultrafilter,
//! natural extensions and bounded transfer over hyperfinite sets, and
//! ultrafunction spaces realized as nested Galerkin levels.

pub mod hyperreal;
pub mod galerkin;
pub mod internal;
pub mod oracle;
pub mod poly;
pub mod ratfn;
pub mod variational;

/// Exact scalar used throughout the hyperreal and internal layers.
pub type Q = num_rational::BigRational;

pub use hyperreal::{Hyperreal, HyperrealError, Magnitude};
pub use oracle::{Oracle, OracleConfig, OracleError, SetDescriptor};
