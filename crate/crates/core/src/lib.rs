//! Spectral laboratory for the super Efimov effect in two dimensions.
//!
//! The chain runs from a p-wave resonant pair potential, through the
//! Birman-Schwinger operator and its infrared weight, to reduced
//! three-body integral operators whose eigenvalue counts grow like a
//! double logarithm of the energy.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod numerics;
pub mod potential;
pub mod two_body;
pub mod three_body;
pub mod counting;

pub use error::{Error, Result};
