//! Max-min power gain synthesis for linear antenna arrays.
//!
//! The crate maximizes the minimum power gain over a wide mainlobe, with or
//! without a peak sidelobe constraint, using an ADMM splitting whose
//! subproblems are all solved in closed or pseudo-closed form:
//!
//! * [`array`] describes the physical array and its element patterns.
//! * [`operators`] builds the total-power matrix `A = CᴴC` and the whitened
//!   region operators `P`, `Q`.
//! * [`admm`] holds the piecewise `{g0, g, h}` minimizers, the unit-sphere
//!   least-squares solver and the two ADMM loops.
//! * [`oracle`] contains brute-force references used to certify the engine.
//! * [`synthesis`] assembles problems, runs them and computes metrics.
//! * [`io`] reads configuration and geometry files and writes results.

pub mod admm;
pub mod array;
pub mod error;
pub mod io;
pub mod operators;
pub mod oracle;
pub mod synthesis;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
