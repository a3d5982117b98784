//! Pseudospectral tools for the pressureless damped Euler-Riesz system on periodic boxes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod lp;
pub mod snapshot;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
pub use grid::{FieldState, RieszParams, SpectralGrid};
pub use rustfft::num_complex::Complex64;
