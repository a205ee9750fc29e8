//! Exact simulation of stabilizer syndrome extraction under mixed
//! coherent/stochastic overrotation noise, with circuit compilations that
//! cancel systematic coherent errors by opposing rotation directions.
//!
//! The crate is organized around a dense density-matrix engine ([`state`]),
//! a rotation-based circuit IR ([`circuit`]), the overrotation channel
//! family ([`noise`]), two distance-3 codes with lookup decoding ([`codes`]),
//! syndrome-extraction synthesis with direction assignment ([`slicer`]), and
//! exact/sampled logical-error evaluation ([`evaluate`]).

pub mod circuit;
pub mod codes;
pub mod evaluate;
pub mod noise;
pub mod pauli;
pub mod slicer;
pub mod state;

mod error;

pub use error::SimError;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SimError>;
