//! Software laboratory for the L-Mul approximate FP8 multiplier.
//!
//! The crate provides four layers over the same arithmetic:
//!
//! - [`fp8`]: FP8 format descriptors, exact encode/decode, classification.
//! - [`lmul`]: the bit-exact behavioral multiplier and the exact reference.
//! - [`netlist`]: a structural model built from dual-output 6-input LUTs and
//!   carry-chain elements, proven equivalent to the behavioral model by
//!   exhaustive enumeration over all 65,536 operand pairs per format.
//! - [`sweep`]: exhaustive error characterization (EP/MAE/MRE/MSE/NED and
//!   error histograms) under configurable enumeration policies.
//! - [`nn`]: a small dense-network inference harness with pluggable scalar
//!   multiplier backends to measure end-to-end accuracy impact.
//!
//! Exhaustive loops are data-parallel behind the `parallel` feature
//! (enabled by default); the sequential fallback produces bit-identical
//! results.

pub mod fp8;
pub mod lmul;
pub mod netlist;
pub mod nn;
pub mod par;
pub mod sweep;

pub use fp8::{Fp8Value, FpFormat, ValuePolicy};
pub use lmul::{l_mul, LmulProduct, ZeroPolicy};
