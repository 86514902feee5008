//! Wavelet analysis of growth spaces of harmonic functions on the
//! periodized upper half-space `T × (0, ∞)`.
//!
//! The pipeline: a doubling [`weight::Weight`] yields a [`weight::ScalePlan`];
//! boundary data on the torus are extended by spectral Poisson multipliers
//! ([`poisson`]); wavelet blocks adapted to the plan ([`wavelet`]) measure
//! growth ([`growth`]), drive the martingale approximation of vertical
//! averages ([`oscillation`]) and the coefficient sequence space
//! ([`seqspace`]).

// `!(x > 0.0)` is the idiom here for rejecting NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod growth;
pub mod oscillation;
pub mod poisson;
pub mod seqspace;
pub mod stats;
pub mod wavelet;
pub mod weight;

pub use error::{Error, Result};
pub use grid::GridFunction;
