//! Stochastic inverse subspace iteration.
//!
//! Starting from the eigenvectors of the mean problem, each step solves the
//! Galerkin systems `A(ξ) v^s(ξ) = u^s(ξ)` with a low-rank inner solver,
//! orthonormalizes the results pointwise in the parameter by quadrature, and
//! measures the expected largest principal angle between successive
//! subspaces. After convergence the Rayleigh quotients and the projected
//! matrix used for Rayleigh-Ritz refinement are expanded in the chaos basis.

mod angle;
mod ortho;
mod problem;
mod rayleigh;

use faer::Mat;
use serde::{Deserialize, Serialize};

pub use angle::{largest_principal_angle, subspace_angle};
pub use ortho::{gram_schmidt, normalize};
pub use problem::{
    DiffusionEigenProblem, DiffusionOptions, EigenProblem, InnerTolerances, StokesEigenProblem, StokesOptions,
    VelocityPreconditioner,
};
pub use rayleigh::{product_expansion, quadrature_mean, rayleigh_quotient, rayleigh_ritz, RitzExpansion};

use crate::chaos::{ChaosBasis, SparseGrid};
use crate::error::{Error, Result};
use crate::lowrank::{Iterate, TruncationSpec};

/// Quadrature rule on the parameter box together with the basis values at its nodes.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub points: Vec<Vec<f64>>,
    /// Weights for the uniform probability measure (they sum to one).
    pub weights: Vec<f64>,
    /// `psi[(k, q)] = ψ_k(ξ_q)`.
    pub psi: Mat<f64>,
}

impl Quadrature {
    pub fn new(basis: &ChaosBasis, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        assert_eq!(points.len(), weights.len());
        let psi = basis.eval_matrix(&points);
        Quadrature { points, weights, psi }
    }

    pub fn sparse_grid(basis: &ChaosBasis, level: usize) -> Self {
        let grid = SparseGrid::new(basis.n_vars(), level);
        Self::new(basis, grid.points().to_vec(), grid.weights().to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// How the inner solver tolerance evolves over the outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnerSchedule {
    /// `max(min(10⁻² ε_θ, 10⁻³), 10⁻⁶)` with the previous angle `ε_θ`.
    Adaptive,
    Fixed(f64),
}

impl InnerSchedule {
    pub fn tolerance(&self, previous_angle: Option<f64>) -> f64 {
        match *self {
            InnerSchedule::Adaptive => tolerance_schedule(previous_angle),
            InnerSchedule::Fixed(tol) => tol,
        }
    }
}

/// Inexact inverse iteration: loose solves while the subspace is still far off.
pub fn tolerance_schedule(previous_angle: Option<f64>) -> f64 {
    let e = previous_angle.unwrap_or(f64::INFINITY);
    (1e-2 * e).clamp(1e-6, 1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub n_e: usize,
    pub tol_isi: f64,
    pub max_iter: usize,
    pub schedule: InnerSchedule,
    /// Absolute truncation after Gram-Schmidt and the Rayleigh matvec.
    pub post_truncation: f64,
    /// Tolerance of the deterministic mean-problem eigensolve.
    pub mean_tol: f64,
    /// Evaluate the residual indicator every iteration (costs one operator application per vector).
    pub residual_diagnostics: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            n_e: 1,
            tol_isi: 1e-5,
            max_iter: 50,
            schedule: InnerSchedule::Adaptive,
            post_truncation: 1e-8,
            mean_tol: 1e-12,
            residual_diagnostics: false,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_e == 0 {
            return Err(Error::Config("n_e must be at least 1".into()));
        }
        if !(self.tol_isi > 0.0) || !(self.post_truncation >= 0.0) || !(self.mean_tol > 0.0) {
            return Err(Error::Config("iteration tolerances must be positive".into()));
        }
        if let InnerSchedule::Fixed(t) = self.schedule {
            if !(t > 0.0) {
                return Err(Error::Config("fixed inner tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `ε_θ`, the expected largest principal angle to the previous subspace.
    pub angle: f64,
    pub inner_tol: f64,
    /// Ranks of the inner solutions `v^s`.
    pub solve_ranks: Vec<usize>,
    /// Ranks of the orthonormalized iterates `u^s`.
    pub ranks: Vec<usize>,
    /// Largest rank met inside each inner solve.
    pub inner_max_ranks: Vec<usize>,
    pub inner_iterations: Vec<usize>,
    /// Final relative residual of each inner solve.
    pub inner_residuals: Vec<f64>,
    /// Relative change of the chaos coefficients, averaged over the basis.
    pub coefficient_change: Vec<f64>,
    /// Relative norm of the residual `A u - λ u`, when requested.
    pub residual: Option<Vec<f64>>,
}

/// Result of the stochastic inverse subspace iteration.
#[derive(Debug, Clone)]
pub struct EigenSolution<X> {
    /// Coefficient matrices of the eigenvectors in the transformed variable `w = Lᵀ u`.
    pub eigvecs: Vec<X>,
    /// Chaos coefficients of the eigenvalues (Rayleigh quotients).
    pub eigvals: Vec<Vec<f64>>,
    /// Projected matrix for Rayleigh-Ritz refinement.
    pub ritz: RitzExpansion,
    pub mean_eigenvalues: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

impl<X> EigenSolution<X> {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn final_angle(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.angle)
    }
}

/// Rank-one iterates `ū^s e_0ᵀ` from the mean problem, with the mean eigenvalues.
pub fn initial_iterate<X: Iterate, P: EigenProblem>(
    problem: &P,
    n_xi: usize,
    n_e: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<X>)> {
    let (values, vectors) = problem.mean_eigenpairs(n_e, tol)?;
    let us = (0..n_e)
        .map(|s| {
            let mut d = Mat::zeros(vectors.nrows(), n_xi);
            d.col_mut(0).copy_from(vectors.col(s));
            X::from_dense(d.as_ref(), &TruncationSpec::exact())
        })
        .collect();
    Ok((values, us))
}

/// `(1/n_ξ) Σ_k ‖u_k - v_k‖ / ‖v_k‖` over the coefficient columns with `v_k ≠ 0`.
pub fn coefficient_change<X: Iterate>(now: &X, prev: &X) -> f64 {
    let diff = now.sub(prev).column_norms();
    let base = prev.column_norms();
    let n = base.len();
    if n == 0 {
        return 0.0;
    }
    diff.iter()
        .zip(&base)
        .filter(|(_, &b)| b > 0.0)
        .map(|(d, b)| d / b)
        .sum::<f64>()
        / n as f64
}

/// `‖R‖ / ‖W‖` where `W` is the Galerkin image `A u` and `R = W - Π(λ u)`.
pub fn residual_indicator<X: Iterate, P: EigenProblem>(
    u: &X,
    lambda: &[f64],
    problem: &P,
    quad: &Quadrature,
    post: &TruncationSpec,
) -> Result<f64> {
    let w = problem.operator_apply(u, post)?;
    let scaled: Vec<f64> = (0..quad.len())
        .map(|q| quad.weights[q] * crate::dense::dot(lambda, quad.psi.col_as_slice(q)))
        .collect();
    let lu = u.weighted_projection(quad.psi.as_ref(), &scaled);
    let wn = w.norm();
    Ok(if wn > 0.0 { w.sub(&lu).norm() / wn } else { 0.0 })
}

/// Runs the stochastic inverse subspace iteration until `ε_θ ≤ tol_isi`.
pub fn isi_run<X: Iterate, P: EigenProblem>(
    problem: &P,
    basis: &ChaosBasis,
    quad: &Quadrature,
    cfg: &IterationConfig,
) -> Result<EigenSolution<X>> {
    isi_run_observed(problem, basis, quad, cfg, &mut |_| {})
}

/// [`isi_run`] reporting every finished outer iteration to `observer`.
pub fn isi_run_observed<X: Iterate, P: EigenProblem>(
    problem: &P,
    basis: &ChaosBasis,
    quad: &Quadrature,
    cfg: &IterationConfig,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<EigenSolution<X>> {
    cfg.validate()?;
    if problem.n_vars() != basis.n_vars() {
        return Err(Error::DimensionMismatch(format!(
            "problem has {} random variables, basis has {}",
            problem.n_vars(),
            basis.n_vars()
        )));
    }
    let post = TruncationSpec::absolute(cfg.post_truncation);
    let (mean_eigenvalues, mut us) = initial_iterate::<X, P>(problem, basis.len(), cfg.n_e, cfg.mean_tol)?;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut previous_angle = None;

    for iteration in 1..=cfg.max_iter {
        let inner_tol = cfg.schedule.tolerance(previous_angle);
        let tols = problem.inner_tolerances(inner_tol);
        let mut vs = Vec::with_capacity(cfg.n_e);
        let mut stats = Vec::with_capacity(cfg.n_e);
        for u in &us {
            let (v, st) = problem.inverse_step(u, &tols)?;
            vs.push(v);
            stats.push(st);
        }
        let next = gram_schmidt(&vs, quad, &post)?;
        let angle = subspace_angle(&next, &us, quad)?;
        let residual = if cfg.residual_diagnostics {
            let mut r = Vec::with_capacity(cfg.n_e);
            for u in &next {
                let lambda = rayleigh_quotient(u, problem, basis, &post)?;
                r.push(residual_indicator(u, &lambda, problem, quad, &post)?);
            }
            Some(r)
        } else {
            None
        };
        history.push(IterationRecord {
            iteration,
            angle,
            inner_tol,
            solve_ranks: vs.iter().map(Iterate::rank).collect(),
            ranks: next.iter().map(Iterate::rank).collect(),
            inner_max_ranks: stats.iter().map(|s| s.max_rank).collect(),
            inner_iterations: stats.iter().map(|s| s.iterations).collect(),
            inner_residuals: stats.iter().map(|s| s.final_residual()).collect(),
            coefficient_change: next.iter().zip(&us).map(|(a, b)| coefficient_change(a, b)).collect(),
            residual,
        });
        observer(history.last().unwrap());
        us = next;
        previous_angle = Some(angle);
        if angle <= cfg.tol_isi {
            let ritz = RitzExpansion::build(&us, problem, basis, &post)?;
            let eigvals = (0..cfg.n_e).map(|s| ritz.diagonal(s).to_vec()).collect();
            return Ok(EigenSolution {
                eigvecs: us,
                eigvals,
                ritz,
                mean_eigenvalues,
                history,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "stochastic inverse subspace iteration",
        iterations: cfg.max_iter,
        residual: previous_angle.unwrap_or(f64::NAN),
    })
}
