//! Locality-sensitive hashing over the Hamming cube `{0,1}^d`.
//!
//! * [`hash`]: hash functions, hash families, powering, exact `(r, cr, p, q)` sensitivity.
//! * [`spectral`]: Fourier spectra, noise stability, and the log-convexity of `K(t)`.
//! * [`sampling`]: correlated pairs, Monte Carlo stability, binomial tails, the sandwich check.
//! * [`bounds`]: closed-form upper and lower bounds on `rho` and the Chernoff ledger.
//! * [`index`]: an `(r, c)`-near-neighbor index built from any sensitive family.
//! * [`verify`]: invariant suites that tie the modules together.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod hash;
pub mod index;
pub mod point;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod verify;

pub use error::{LshError, Result};
pub use point::Point;
