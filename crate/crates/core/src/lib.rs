//! Adversarial stochastic convex optimization constructions, the optimizers
//! they separate, and executable checks of their supporting lemmas.

// Negated float comparisons in this crate are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod losses;
pub mod optimizers;
pub mod population;
pub mod relunet;
pub mod rerm;
pub mod rng;
pub mod vecspace;
pub mod verify;

pub use error::{Error, Result};
pub use vecspace::{BallSpec, BitMask, DenseVector};
