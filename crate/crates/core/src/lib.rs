//! Numerical heat kernels on weighted model spaces.
//!
//! A model space is a line or half-line carrying the measure `A(r) dr`;
//! the operator `A⁻¹(A u′)′` is the radial part of the Laplacian of a
//! rotationally symmetric manifold. Heat kernels come from Crank–Nicolson
//! runs on a truncated grid; the analysis modules measure their Gaussian
//! bounds and long-time behaviour, including where that behaviour breaks on a
//! two-ended space.
//!
//! The numerical core (`space`, `evolve`, `kernel`) is generic over the
//! scalar type; the analysis layers work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod counterexample;
pub mod error;
pub mod estimates;
pub mod evolve;
pub mod fit;
pub mod io;
pub mod kernel;
pub mod planar;
pub mod quadrature;
pub mod scalar;
pub mod space;
pub mod special;
pub mod tridiag;

pub use error::{HeatError, Result};
pub use scalar::Real;

pub type Space = space::SpaceSpec<f64>;
pub type Operator = evolve::DiscreteOperator<f64>;
pub type Schedule = evolve::TimeSchedule<f64>;
pub type State = evolve::SolutionState<f64>;
pub type Model = kernel::HeatModel<f64>;
pub type Kernel = kernel::KernelSlice<f64>;

pub type Space32 = space::SpaceSpec<f32>;
pub type Model32 = kernel::HeatModel<f32>;
