//! Numerical laboratory for bubble-tower reductions on perforated balls.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bubbles;
pub mod coupling;
pub mod energy;
pub mod error;
pub mod fit;
pub mod green;
pub mod quadrature;
pub mod radial;

pub use error::{LabError, Result};
