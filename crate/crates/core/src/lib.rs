//! Modified-Bessel resolvent kernels of the Schrodinger family
//! `H(xi) = -d^2/du^2 + xi^2 e^{2u}`, the Riesz multiplier kernels built from
//! them, finite-difference operator oracles, Muckenhoupt weights and a
//! registry of pointwise kernel estimates checked by ratio sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;

pub mod bessel;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod quad;
pub mod scaled;
pub mod schrodinger;
pub mod special;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use scaled::ScaledValue;
