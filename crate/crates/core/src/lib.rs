#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

//! Hardy space machinery for the model worm domain: Szego kernel evaluation,
//! the boundary Szego projection through sheet-pair Fourier multipliers, and
//! numerical certificates for the multiplier estimates behind its regularity.

pub mod analysis;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod projector;
pub mod quadrature;
pub mod strip;
pub mod suite;

pub use error::{Error, Result};
