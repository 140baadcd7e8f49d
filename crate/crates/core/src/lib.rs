//! Low-rank stochastic Galerkin eigensolvers for elliptic PDEs with random
//! coefficients.
//!
//! The crate computes the smallest eigenpairs of a stochastic diffusion
//! problem and the inf-sup eigenproblem of a stochastic Stokes problem by an
//! inverse subspace iteration whose iterates are generalized polynomial chaos
//! expansions stored as low-rank matrices.

// Numeric kernels index several arrays in lockstep, and `!(x > 0.0)` is the
// NaN-rejecting positivity test.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod dense;
pub mod discretize;
pub mod error;
pub mod iteration;
pub mod lowrank;
pub mod randfield;
pub mod reference;
pub mod solvers;

pub use error::{Error, Result};
