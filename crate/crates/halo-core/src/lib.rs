//! Hardware-aware post-training quantization (HALO).
//!
//! The pipeline characterizes an 8-bit MAC unit at gate level to learn which
//! quantized weight values admit short critical paths, quantizes weight
//! matrices into per-tile frequency-class codebooks driven by Fisher
//! sensitivity, and synthesizes a DVFS schedule that runs fast tiles at high
//! clock rates. A deterministic systolic-array simulator reports execution
//! time and an energy breakdown for the result.

pub mod dvfs;
pub mod error;
pub mod netlist;
pub mod pipeline;
pub mod profile;
pub mod quantize;
pub mod sensitivity;
pub mod sim;

pub use error::{HaloError, Result};
