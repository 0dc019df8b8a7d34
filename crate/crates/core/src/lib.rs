//! Compressed-sensing acquisition of ECG frames on simulated low-power
//! approximate adders.
//!
//! The pipeline quantizes a frame to fixed point, compresses it with a
//! Bernoulli "sparse multiplier" whose additions run on bit-accurate
//! ripple-carry adders ([`approx_arith`]), adds channel noise
//! ([`channel`]), reconstructs with an lp second-difference least-squares
//! solver ([`recon`]) and scores the result ([`metrics`], [`energy`]).
//! [`harness`] ties the stages together into experiments and sweeps.

pub mod approx_arith;
pub mod channel;
pub mod energy;
mod error;
pub mod fixedpoint;
pub mod harness;
pub mod metrics;
pub mod recon;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};
