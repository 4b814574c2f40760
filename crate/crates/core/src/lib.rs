//! Phase-native sequence models on the torus.
//!
//! Token states are unit-modulus phasors, token mixing is the unitary DFT and
//! the only trainable parameters are per-thread phase shifts. The crate also
//! carries the pieces needed to train and compare these models: a small
//! reverse-mode tape over real and complex vectors, a dense self-attention
//! baseline, a seeded synthetic data generator and an Adam training harness.
//!
//! Everything here is `no_std` + `alloc`; file formats, the CLI and
//! wall-clock measurement live in the companion `lpm` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attention;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod fft;
pub mod gradients;
pub mod math;
pub mod phasor;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{ComplexVec, RealVec};
