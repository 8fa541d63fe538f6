//! Reconstruction attacks and lower-bound certifiers for noisy query release.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense matrices, projected norms, Hadamard row products and
//!   smallest singular values.
//! - [`lp`]: exact ℓ1-residual minimization by simplex.
//! - [`data`]: histogram/bit databases, attribute tables and the explicit
//!   database families used by packing arguments.
//! - [`queries`]: counting, Lipschitz-embedding and ℓ-way marginal queries,
//!   plus the packing certifier.
//! - [`mechanisms`]: Laplace, Gaussian and bounded-noise releases.
//! - [`attacks`]: LP decoding, exhaustive small-universe attacks, the
//!   attribute attack, nearest-neighbour decoding and the (ε,δ) witness.
//! - [`analysis`]: Monte Carlo validators for the concentration facts the
//!   attacks rely on.
//! - [`experiments`]: named, seeded experiments shared by the CLI and the
//!   acceptance suite.

pub mod analysis;
pub mod attacks;
pub mod data;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod mechanisms;
pub mod queries;
pub mod rng;

mod error;

pub use error::{Error, Result};

/// Crate version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
