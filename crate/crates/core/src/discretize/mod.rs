//! Finite element discretizations on the unit square `[-1, 1]²`, the
//! envelope Cholesky factorization and the grid hierarchy used by multigrid.

mod cholesky;
mod diffusion;
pub mod fem;
mod matrix_market;
mod stokes;

pub use cholesky::EnvelopeCholesky;
pub use diffusion::{q1_dof, q1_prolongation, DiffusionProblem};
pub use fem::Mesh;
pub use matrix_market::write_matrix_market;
pub use stokes::{q1_all_dof, q2_free_dof, q2_prolongation, StokesProblem};

use crate::error::{Error, Result};
use crate::lowrank::SparseMatrix;
use crate::randfield::KlExpansion;

/// Coarsest level used by the multigrid hierarchies.
pub const COARSEST_LEVEL: usize = 1;

/// Spatial operators on one level of a nested mesh hierarchy.
#[derive(Debug, Clone)]
pub struct SpatialLevel {
    pub n_c: usize,
    /// `K_0, K_1, …, K_m` re-assembled on this level.
    pub stiffness: Vec<SparseMatrix>,
    /// Interpolation from the next coarser level, absent on the coarsest.
    pub prolongation: Option<SparseMatrix>,
    /// Transpose of `prolongation`.
    pub restriction: Option<SparseMatrix>,
}

/// Levels ordered from coarsest to finest.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<SpatialLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// Scalar Q1 diffusion on interior nodes.
    Diffusion,
    /// Q2 velocity Laplacian of the Stokes problem.
    StokesVelocity,
}

impl Hierarchy {
    pub fn build(kind: Discretization, n_c: usize, n_c0: usize, kl: &KlExpansion) -> Result<Self> {
        if n_c0 < 1 || n_c0 > n_c {
            return Err(Error::Config(format!("coarsest level {n_c0} must be in 1..={n_c}")));
        }
        let mut levels = Vec::new();
        for level in n_c0..=n_c {
            let stiffness = match kind {
                Discretization::Diffusion => DiffusionProblem::assemble(level, kl)?.stiffness,
                Discretization::StokesVelocity => {
                    let mesh = Mesh::new(level);
                    let (dof, n) = q2_free_dof(mesh);
                    diffusion::stiffness_matrices(mesh, kl, 2, &dof, n)?
                        .iter()
                        .map(stokes::block_diag2)
                        .collect()
                }
            };
            let prolongation = (level > n_c0).then(|| match kind {
                Discretization::Diffusion => q1_prolongation(level),
                Discretization::StokesVelocity => q2_prolongation(level),
            });
            let restriction = prolongation.as_ref().map(SparseMatrix::transpose);
            levels.push(SpatialLevel {
                n_c: level,
                stiffness,
                prolongation,
                restriction,
            });
        }
        Ok(Hierarchy { levels })
    }

    pub fn finest(&self) -> &SpatialLevel {
        self.levels.last().expect("hierarchy has at least one level")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randfield::KlTruncation;

    #[test]
    fn galerkin_coarse_operator_matches_rediscretization_for_q1() {
        // For bilinear elements with constant coefficient, Pᵀ K_h P equals K_2h.
        let kl = KlExpansion::new(4.0, 0.01, KlTruncation::Fixed(1)).unwrap();
        let h = Hierarchy::build(Discretization::Diffusion, 4, 2, &kl).unwrap();
        assert_eq!(h.levels.len(), 3);
        let fine = h.finest();
        let p = fine.prolongation.as_ref().unwrap();
        let galerkin = fine.restriction.as_ref().unwrap().mul_sparse(&fine.stiffness[0].mul_sparse(p));
        let diff = galerkin.to_dense() - h.levels[1].stiffness[0].to_dense();
        assert!(diff.norm_l2() < 1e-12);
    }

    #[test]
    fn stokes_hierarchy_dimensions() {
        let kl = KlExpansion::new(4.0, 0.01, KlTruncation::Fixed(1)).unwrap();
        let h = Hierarchy::build(Discretization::StokesVelocity, 3, 2, &kl).unwrap();
        let p = h.finest().prolongation.as_ref().unwrap();
        assert_eq!(p.nrows(), h.finest().stiffness[0].nrows());
        assert_eq!(p.ncols(), h.levels[0].stiffness[0].nrows());
    }
}
