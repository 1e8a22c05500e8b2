//! Vanishing-viscosity laboratory for diagonal hyperbolic systems
//! `u^i_t + lambda^i(u) u^i_x = 0` with nondecreasing data.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::large_enum_variant)]

pub mod cli;
pub mod convergence;
pub mod diagnostics;
pub mod dislocation;
pub mod error;
pub mod grid;
pub mod orlicz;
pub mod solver;
pub mod system;

pub use error::{Error, Result};
pub use grid::{GridFunction, ScalarGridFunction, UniformGrid};
pub use system::DiagonalSystem;
