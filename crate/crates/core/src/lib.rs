//! Dual variational principles for nonlinear PDE systems.
//!
//! A primal PDE system is enforced with Lagrange multiplier ("dual") fields,
//! an auxiliary convex potential `H` is added, and the primal fields are
//! eliminated through a Legendre transform taken with the dual-field
//! derivatives held as a parameter. What remains is a functional of the dual
//! fields alone whose Euler-Lagrange equations are the original system.
//!
//! The crate is organised bottom-up:
//!
//! - [`legendre`]: the parametric transform `M*(P, L)` of
//!   `M(U, L) = H(U) - L . F(U)`, its envelope derivatives and
//!   admissibility certificates.
//! - [`grid`], [`diff`], [`gradcheck`]: space-time grids, multi-component
//!   fields, finite-difference stencils with exact transposes, trapezoidal
//!   quadrature and a finite-difference gradient checker.
//! - [`problems`]: discrete dual objectives with exact gradients for the heat
//!   equation, scalar conservation laws, a viscous Hamilton-Jacobi equation
//!   and incompressible Navier-Stokes (dual and mixed actions).
//! - [`optimizer`]: fake-time gradient ascent with line search and optional
//!   Polak-Ribiere conjugate directions.
//! - [`verify`]: independent reference solutions and error norms.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diff;
pub mod error;
pub mod gradcheck;
pub mod grid;
pub mod legendre;
pub mod linalg;
pub mod math;
pub mod optimizer;
pub mod problems;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Axis, Boundary, Field, SpaceTimeGrid};
