//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every primitive as it is evaluated (define-by-run).
//! Calling [`Tape::backward`] on a scalar node walks the tape in exact
//! reverse creation order and accumulates adjoints for every node that
//! depends on a tracked parameter.
//!
//! ```
//! use gate_diffkit::{Tape, Mat};
//! use ndarray::array;
//!
//! let mut tape = Tape::new();
//! let x = tape.param(&array![[1.0, 2.0], [3.0, 4.0]]);
//! let y = tape.sigmoid(x).unwrap();
//! let loss = tape.sum(y).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).dim(), (2, 2));
//! # let _: Mat = grads.get(x);
//! ```
//!
//! Broadcasting is deliberately limited to row/column bias addition and
//! scaling by a 1×1 node; every other shape mismatch is an error.

mod adam;
mod check;
mod error;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use check::{finite_diff_check, finite_diff_gradient};
pub use error::DiffError;
pub use tape::{Gradients, Tape, Var};

/// Dense row-major matrix used for every value on the tape.
pub type Mat = ndarray::Array2<f64>;

pub type Result<T> = std::result::Result<T, DiffError>;
