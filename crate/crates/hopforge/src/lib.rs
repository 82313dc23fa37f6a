//! Link-level simulator and beamforming optimizer for multi-hop RIS-assisted
//! terahertz multiuser downlinks.
//!
//! The crate is organized around the signal chain:
//!
//! - [`channel`] draws THz channel realizations (deterministic line-of-sight
//!   link budgets composed with Rayleigh small-scale fading) for a configured
//!   base-station / RIS-chain / user topology.
//! - [`signal`] composes the multi-hop effective channel, evaluates per-user
//!   SINR and system sum rate, and enforces the two feasibility projections
//!   (transmit-power trace constraint, unit-modulus phase shifts).
//! - [`baselines`] provides the reference beamformers: full-digital
//!   zero-forcing without RIS, best-of-N random phases, and single-hop
//!   alternating optimization over a phase grid.
//! - [`neural`] is a self-contained dense network stack (ReLU/tanh layers,
//!   batch normalization, backpropagation, Adam) with a finite-difference
//!   gradient checker.
//! - [`ddpg`] trains an actor-critic agent that jointly designs the digital
//!   precoder and the per-RIS phase vectors.
//! - [`harness`] ties everything into reproducible experiments: config files,
//!   distance sweeps, reward traces, coverage reports, and CSV output.
//!
//! All stochastic operations take an explicit seeded generator; a fixed seed
//! reproduces every output byte for byte.

// Validators use `!(x > 0.0)` on purpose: the negation rejects NaN along
// with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod ddpg;
pub mod error;
pub mod harness;
pub mod neural;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
