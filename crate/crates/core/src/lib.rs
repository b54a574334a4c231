//! Poisson latent-space variational graph auto-encoder (GATE) and its
//! supervised extension (reGATE).

mod error;
pub mod eval;
pub mod graph;
pub mod inference;
pub mod io;
pub mod model;
pub mod regate;
pub mod rng;
pub mod synth;

pub use error::{GateError, Result};
