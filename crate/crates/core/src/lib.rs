//! Generalized principal eigenvalue of `u -> int K(x, y) u(y) dy + a(x) u(x)`
//! on a bounded domain, classification of the principal eigen-object
//! (continuous, L^1 or singular measure) and explicit measure solutions.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod measure;
pub mod model;
pub mod presets;
pub mod spectral;
pub mod verify;

pub use error::{Error, Hypothesis, Result};
