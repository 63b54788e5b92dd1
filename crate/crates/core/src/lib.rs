//! Solver for the discrete nonlinear fragmentation equation with
//! size-dependent diffusion.
//!
//! The state is a truncated size spectrum `f_1..f_n` on a 1D interval or 2D
//! rectangle with zero-flux boundaries, advanced by method of lines.

pub mod field;
pub mod grid;
pub mod initial;
pub mod kernels;
pub mod numeric;
pub mod reaction;
pub mod config;
pub mod stepper;
pub mod monitors;
pub mod run;
