//! Dirty-paper coding with sign-bit trellis shaping and LDPC channel coding.
//!
//! This crate implements a lattice-style DPC transmitter/receiver pair over
//! modulo-folded M-PAM: a rate-1/2 shaping convolutional code selects the
//! sign bit of every symbol by Viterbi energy minimization within a coset,
//! while an irregular LDPC code protects the remaining bit planes. Parity
//! bits of each LDPC codeword ride in the *next* block's lower bit planes
//! (a one-codeword delay), which lets the receiver run the LDPC decoder
//! first and recover the coset syndrome afterwards, with no iteration
//! between shaping and channel decoders.
//!
//! The numeric core is generic over the scalar type (`f32` or `f64`) via
//! [`Real`]; the crate-root aliases below fix the default `f64`
//! instantiations used by the CLI and the simulation harness.

pub mod broadcast;
pub mod channel;
pub mod conv;
pub mod error;
pub mod gf2;
pub mod ldpc;
pub mod modulation;
pub mod pipeline;
pub mod real;
pub mod shaping;
pub mod sim;

pub use error::{Error, Result};
pub use gf2::{BitVector, DenseBitMatrix, Gf2Matrix};
pub use real::Real;

/// Default scalar used by the CLI and simulator.
pub type Scalar = f64;

/// 16-PAM mapping at the default scalar.
pub type PamMapping = modulation::PamMapping<Scalar>;
/// Replicated receive constellation at the default scalar.
pub type ReplicatedConstellation = modulation::ReplicatedConstellation<Scalar>;
/// Full single-stream DPC system at the default scalar.
pub type DpcSystem = pipeline::DpcSystem<Scalar>;
/// System parameter block at the default scalar.
pub type DpcSystemParams = pipeline::DpcSystemParams<Scalar>;
