//! Secular coefficients of critical holomorphic multiplicative chaos with
//! non-Gaussian inputs.
//!
//! The crate computes the coefficients `A_N` of `z^N` in
//! `exp(Σ_k X_k z^k / √k)`, evaluates their low moments exactly through the
//! partition expansion and by Monte Carlo, and provides the truncated-chaos
//! diagnostics (total mass, barrier events, Laplace functionals, kernels).

pub mod chaos;
pub mod dist;
pub mod engine;
pub mod experiments;
pub mod error;
pub mod partition;
pub mod numerics;

pub use error::{Error, Result};
