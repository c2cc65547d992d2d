//! Resonant control of a qubit coupled to a harmonic resonator.
//!
//! The crate covers the dressed Jaynes-Cummings spectrum, multi-tone ladder
//! pulses, Schrödinger propagation in the dressed basis, derivative-free pulse
//! optimization, and the composite protocols built on top of them (Fock-state
//! preparation, qudit rotations and NOON-state synthesis).
//!
//! Units: every frequency and energy is an ordinary frequency in MHz, every
//! time is in ns. Phases are formed internally as `2π · MHz · ns · 1e-3`.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
// Builds that link std shadow `Float` with the inherent float methods.
#![allow(unused_imports)]

extern crate alloc;

pub mod dynamics;
mod error;
pub mod jc;
pub mod linalg;
pub mod optimizer;
pub mod protocols;
pub mod pulses;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Converts a product `MHz · ns` into cycles.
pub const MHZ_NS: f64 = 1e-3;

/// 2π.
pub const TAU: f64 = core::f64::consts::TAU;
