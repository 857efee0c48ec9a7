//! Ground-state spectrum of the Hulthén potential in an even-tempered
//! exponential basis, and finite-size scaling analysis of its critical point.

// `!(a < b)` is used on purpose so that NaN fails the guard.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod basis;
pub mod cli;
pub mod config;
pub mod eigensolver;
pub mod error;
pub mod fss;
pub mod linalg;
pub mod pencil;
pub mod quadrature;
pub mod scalar;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
pub use scalar::{DoubleDouble, Scalar};
