//! Iterative solvers for stochastic Galerkin systems with low-rank iterates,
//! together with the preconditioners and deterministic eigensolvers they use.

mod cg;
pub mod eigs;
mod kron;
mod minres;
mod multigrid;
pub mod precond;

pub use cg::{pcg, CgConfig};
pub use kron::KroneckerDirect;
pub use minres::{BlockIterate, MinresConfig, SaddleOperator};
pub use multigrid::{dense_solve, LowRankMultigrid, MultigridConfig, MultigridTolerances};
pub use precond::{DiagonalPreconditioner, GeometricMultigrid, IdentityPreconditioner, SpatialPreconditioner};

/// Convergence record of one linear solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub residuals: Vec<f64>,
    /// Largest rank of the stored iterates seen.
    pub max_rank: usize,
    /// Relative residual recomputed from the final iterate, when available.
    pub true_residual: Option<f64>,
}

impl SolveStats {
    fn record(&mut self, residual: f64, rank: usize) {
        self.residuals.push(residual);
        self.max_rank = self.max_rank.max(rank);
        self.iterations = self.residuals.len();
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}
