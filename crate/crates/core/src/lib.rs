//! Lagrangian time-Taylor solver for the incompressible Euler equations.
//!
//! The flow map `X(a, t) = a + sum_s xi^(s)(a) t^s` is built order by order
//! from the Cauchy invariants and the volume-preservation constraint.  Each
//! coefficient is recovered from its curl, divergence and wall-normal trace
//! by a Hodge solve; the stepper sums the series, re-labels, and repeats.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod faadibruno;
pub mod field;
pub mod hodge;
mod linalg;
mod par;
pub mod recursion;
pub mod stepper;
pub mod weights;

pub use error::{Error, Result};
pub use field::{Geometry, LabelGrid, ScalarField, TaylorSeries, VectorField, WallField};
