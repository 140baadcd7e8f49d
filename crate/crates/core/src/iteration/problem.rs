use faer::{Mat, MatRef};

use crate::chaos::ChaosBasis;
use crate::discretize::{Discretization, DiffusionProblem, EnvelopeCholesky, Hierarchy, StokesProblem};
use crate::error::Result;
use crate::lowrank::{Iterate, OperatorStack, SparseMatrix, TruncationSpec};
use crate::randfield::KlExpansion;
use crate::solvers::eigs::{dense_smallest, schur_complement, sparse_smallest};
use crate::solvers::{
    pcg, BlockIterate, CgConfig, DiagonalPreconditioner, GeometricMultigrid, LowRankMultigrid, MinresConfig,
    MultigridConfig, MultigridTolerances, SaddleOperator, SolveStats, SpatialPreconditioner,
};

/// Tolerances handed to the inner linear solver in one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerTolerances {
    pub tol: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_rank: Option<usize>,
}

/// A parametrized symmetric eigenproblem `A(ξ) w = λ(ξ) w` in the variable
/// `w = Lᵀ u`, where `M = L Lᵀ` is the mass matrix of the physical problem.
///
/// Iterates are `dim() × n_ξ` coefficient matrices.
pub trait EigenProblem: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of random variables `m`.
    fn n_vars(&self) -> usize;

    /// Smallest eigenpairs of the mean problem with orthonormal eigenvectors.
    fn mean_eigenpairs(&self, n_e: usize, tol: f64) -> Result<(Vec<f64>, Mat<f64>)>;

    /// Inner tolerances derived from the current solver tolerance `tol`.
    fn inner_tolerances(&self, tol: f64) -> InnerTolerances;

    /// Galerkin approximation of `A(ξ)⁻¹ u(ξ)`.
    fn inverse_step<X: Iterate>(&self, u: &X, tols: &InnerTolerances) -> Result<(X, SolveStats)>;

    /// Galerkin approximation of `A(ξ) u(ξ)`, truncated with `post`.
    fn operator_apply<X: Iterate>(&self, u: &X, post: &TruncationSpec) -> Result<X>;

    /// Maps columns of `w` back to physical eigenvectors `u = L⁻ᵀ w`.
    fn to_physical(&self, w: MatRef<'_, f64>) -> Mat<f64>;

    /// Dense `A(ξ)` for one parameter value. Meant for small checks.
    fn operator_at(&self, xi: &[f64]) -> Result<Mat<f64>>;
}

#[derive(Debug, Clone, Copy)]
pub struct DiffusionOptions {
    pub multigrid: MultigridConfig,
    /// `ε_abs = abs_factor · tol`.
    pub abs_factor: f64,
    pub eps_rel: f64,
    pub coarsest_level: usize,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        DiffusionOptions {
            multigrid: MultigridConfig::default(),
            abs_factor: 1e-2,
            eps_rel: 1e-2,
            coarsest_level: crate::discretize::COARSEST_LEVEL,
        }
    }
}

/// `K(ξ) u = λ(ξ) M u` for the Q1 diffusion operator, solved with low-rank multigrid.
#[derive(Debug)]
pub struct DiffusionEigenProblem {
    pub problem: DiffusionProblem,
    pub options: DiffusionOptions,
    mass_factor: EnvelopeCholesky,
    multigrid: LowRankMultigrid,
}

impl DiffusionEigenProblem {
    pub fn new(n_c: usize, kl: &KlExpansion, basis: &ChaosBasis, options: DiffusionOptions) -> Result<Self> {
        let problem = DiffusionProblem::assemble(n_c, kl)?;
        let mass_factor = EnvelopeCholesky::factor(&problem.mass)?;
        let hierarchy = Hierarchy::build(Discretization::Diffusion, n_c, options.coarsest_level.min(n_c), kl)?;
        let multigrid = LowRankMultigrid::new(&hierarchy, &basis.galerkin_matrices(), options.multigrid)?;
        Ok(DiffusionEigenProblem {
            problem,
            options,
            mass_factor,
            multigrid,
        })
    }

    pub fn operator(&self) -> &OperatorStack {
        self.multigrid.operator()
    }

    pub fn mass_factor(&self) -> &EnvelopeCholesky {
        &self.mass_factor
    }
}

impl EigenProblem for DiffusionEigenProblem {
    fn dim(&self) -> usize {
        self.problem.n_x()
    }

    fn n_vars(&self) -> usize {
        self.problem.stiffness.len() - 1
    }

    fn mean_eigenpairs(&self, n_e: usize, tol: f64) -> Result<(Vec<f64>, Mat<f64>)> {
        let res = sparse_smallest(&self.problem.stiffness[0], &self.problem.mass, n_e, tol, None)?;
        Ok((res.values, self.mass_factor.lower_t(res.vectors.as_ref())))
    }

    fn inner_tolerances(&self, tol: f64) -> InnerTolerances {
        InnerTolerances {
            tol,
            eps_abs: self.options.abs_factor * tol,
            eps_rel: self.options.eps_rel,
            max_rank: None,
        }
    }

    fn inverse_step<X: Iterate>(&self, u: &X, tols: &InnerTolerances) -> Result<(X, SolveStats)> {
        let f = u.map_left(|y| self.mass_factor.lower(y));
        let mg = MultigridTolerances {
            tol: tols.tol,
            eps_abs: tols.eps_abs,
            eps_rel: tols.eps_rel,
        };
        let (v, stats) = self.multigrid.solve(&f, &mg)?;
        Ok((v.map_left(|y| self.mass_factor.lower_t(y)), stats))
    }

    fn operator_apply<X: Iterate>(&self, u: &X, post: &TruncationSpec) -> Result<X> {
        let physical = u.map_left(|y| self.mass_factor.backward(y));
        Ok(physical
            .apply(self.operator())
            .map_left(|y| self.mass_factor.forward(y))
            .truncate(post))
    }

    fn to_physical(&self, w: MatRef<'_, f64>) -> Mat<f64> {
        self.mass_factor.backward(w)
    }

    fn operator_at(&self, xi: &[f64]) -> Result<Mat<f64>> {
        let k = self.problem.stiffness_at(xi).to_dense();
        let linv_k = self.mass_factor.forward(k.as_ref());
        Ok(self.mass_factor.forward(linv_k.transpose()))
    }
}

/// How `K_0⁻¹` is approximated in the velocity block of the saddle preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityPreconditioner {
    Cholesky,
    Multigrid,
}

#[derive(Debug, Clone, Copy)]
pub struct StokesOptions {
    pub minres: MinresConfig,
    /// `ε_rel = rel_factor · tol`.
    pub rel_factor: f64,
    /// Rank cap for the MINRES truncations. When `None` it is `3 n_ξ / 10`,
    /// but never below `min(n_ξ, 16)` so that small bases stay uncapped.
    pub max_rank: Option<usize>,
    pub velocity_preconditioner: VelocityPreconditioner,
    /// Relative residual of the CG solve inside the Rayleigh quotient.
    pub cg_tol: f64,
    pub coarsest_level: usize,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions {
            minres: MinresConfig::default(),
            rel_factor: 1e-1,
            max_rank: None,
            velocity_preconditioner: VelocityPreconditioner::Cholesky,
            cg_tol: 1e-8,
            coarsest_level: crate::discretize::COARSEST_LEVEL,
        }
    }
}

/// Smallest eigenvalues of `B K(ξ)⁻¹ Bᵀ q = λ(ξ) M_p q`: the squared inf-sup
/// constant of a Stokes problem with random viscosity.
#[derive(Debug)]
pub struct StokesEigenProblem {
    pub problem: StokesProblem,
    pub options: StokesOptions,
    mass_factor: EnvelopeCholesky,
    saddle: SaddleOperator,
    k0: EnvelopeCholesky,
    divergence_t: SparseMatrix,
    n_xi: usize,
}

impl StokesEigenProblem {
    pub fn new(n_c: usize, kl: &KlExpansion, basis: &ChaosBasis, options: StokesOptions) -> Result<Self> {
        let problem = StokesProblem::assemble(n_c, kl)?;
        let mass_factor = EnvelopeCholesky::factor(&problem.pressure_mass)?;
        let g = basis.galerkin_matrices();
        let velocity = OperatorStack::from_parts(&g, &problem.stiffness);
        let k0 = EnvelopeCholesky::factor(&problem.stiffness[0])?;
        let precond: Box<dyn SpatialPreconditioner> = match options.velocity_preconditioner {
            VelocityPreconditioner::Cholesky => Box::new(k0.clone()),
            VelocityPreconditioner::Multigrid => {
                let h = Hierarchy::build(Discretization::StokesVelocity, n_c, options.coarsest_level.min(n_c), kl)?;
                Box::new(GeometricMultigrid::new(&h, 1, 1.0)?)
            }
        };
        let saddle = SaddleOperator::new(
            velocity,
            problem.divergence.clone(),
            precond,
            Box::new(DiagonalPreconditioner::inverse_of(&problem.pressure_mass)),
        );
        Ok(StokesEigenProblem {
            divergence_t: problem.divergence.transpose(),
            problem,
            options,
            mass_factor,
            saddle,
            k0,
            n_xi: basis.len(),
        })
    }

    pub fn mass_factor(&self) -> &EnvelopeCholesky {
        &self.mass_factor
    }

    pub fn saddle(&self) -> &SaddleOperator {
        &self.saddle
    }
}

impl EigenProblem for StokesEigenProblem {
    fn dim(&self) -> usize {
        self.problem.n_p()
    }

    fn n_vars(&self) -> usize {
        self.problem.stiffness.len() - 1
    }

    fn mean_eigenpairs(&self, n_e: usize, tol: f64) -> Result<(Vec<f64>, Mat<f64>)> {
        let s = schur_complement(&self.problem.stiffness[0], &self.problem.divergence)?;
        let res = dense_smallest(&s, &self.problem.pressure_mass.to_dense(), n_e, tol, None)?;
        Ok((res.values, self.mass_factor.lower_t(res.vectors.as_ref())))
    }

    fn inner_tolerances(&self, tol: f64) -> InnerTolerances {
        InnerTolerances {
            tol,
            eps_abs: 0.0,
            eps_rel: self.options.rel_factor * tol,
            max_rank: Some(self.options.max_rank.unwrap_or((3 * self.n_xi / 10).max(self.n_xi.min(16)))),
        }
    }

    fn inverse_step<X: Iterate>(&self, u: &X, tols: &InnerTolerances) -> Result<(X, SolveStats)> {
        let n_u = self.problem.n_u();
        let f = BlockIterate {
            u: X::zeros(n_u, u.ncols()),
            p: u.map_left(|y| self.mass_factor.lower(y)).scale(-1.0),
        };
        let mut trunc = TruncationSpec::relative(tols.eps_rel);
        trunc.max_rank = tols.max_rank;
        let (x, stats) = self.saddle.minres(&f, tols.tol, &trunc, &self.options.minres)?;
        Ok((x.p.map_left(|y| self.mass_factor.lower_t(y)), stats))
    }

    fn operator_apply<X: Iterate>(&self, u: &X, post: &TruncationSpec) -> Result<X> {
        let rhs = u.map_left(|y| self.divergence_t.mul_dense(self.mass_factor.backward(y).as_ref()));
        let trunc = TruncationSpec::relative(1e-2 * self.options.cg_tol);
        let (w, _) = pcg(
            &self.saddle.velocity,
            &self.k0,
            &rhs,
            self.options.cg_tol,
            &trunc,
            &CgConfig::default(),
        )?;
        Ok(w
            .map_left(|y| self.mass_factor.forward(self.problem.divergence.mul_dense(y).as_ref()))
            .truncate(post))
    }

    fn to_physical(&self, w: MatRef<'_, f64>) -> Mat<f64> {
        self.mass_factor.backward(w)
    }

    fn operator_at(&self, xi: &[f64]) -> Result<Mat<f64>> {
        let s = schur_complement(&self.problem.stiffness_at(xi), &self.problem.divergence)?;
        let linv_s = self.mass_factor.forward(s.as_ref());
        Ok(self.mass_factor.forward(linv_s.transpose()))
    }
}
