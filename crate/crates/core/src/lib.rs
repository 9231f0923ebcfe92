//! Fault-resilience analysis for int8 quantized CNNs.
//!
//! Two assessment routes over the same bit-exact inference engine:
//!
//! * [`fault`]: statistical bitflip injection into stored weights, repeated
//!   over many random faults per image;
//! * [`appraise`]: one pass with the compromised layer's multiplications
//!   routed through an approximate multiplier ([`mult`]).
//!
//! [`analysis`] compares them through normalized output error, bitflips in
//! subsequent layers and accuracy/recall drop, and models their cost.

pub mod analysis;
pub mod appraise;
pub mod error;
pub mod exec;
pub mod fault;
pub mod inference;
pub mod model;
pub mod mult;
pub mod quant;

pub use error::{Error, Result};
pub use quant::{BitAddress, QuantTensor};
