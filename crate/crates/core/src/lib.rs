//! Sampled sub-block Toeplitz hashing for large-input privacy amplification,
//! with the finite-key security calculus needed to size its outputs.

pub mod bbm92;
pub mod bits;
pub mod error;
pub mod geat;
pub mod pipeline;
pub mod rng;
pub mod sampling;
mod search;
pub mod toeplitz;

pub use bits::BitString;
pub use error::{Error, Result};
