//! Finite-alphabet toolkit for simulating a two-sender channel over noiseless
//! links with pairwise shared randomness.
//!
//! The crate is organized around five pieces:
//!
//! * [`prob`] — exact joint distributions over named finite variables,
//!   information measures, total variation, i.i.d. extension, and the
//!   common part of a pair of sources.
//! * [`linineq`] — symbolic linear-inequality systems over rate variables
//!   and opaque entropy atoms, with exact-rational Fourier-Motzkin
//!   elimination and sampled polytope comparison.
//! * [`region`] — evaluators for the six rate-bound families, the
//!   decomposition composer, and multi-start search for membership
//!   certificates and weighted boundary points.
//! * [`osrb`] — finite-blocklength simulation of the random-binning
//!   protocol (binning, Slepian-Wolf decoding, output synthesis) and the
//!   soft-covering synthesizer.
//! * [`examples1`] — executable reproductions of the worked four-symbol
//!   selector example and the region-derivation checks.

pub mod examples1;
pub mod linineq;
pub mod osrb;
pub mod prob;
pub mod region;

pub use prob::{CommonPartLabeling, ConditionalKernel, JointPmf, ProbError, VariableDecl};
