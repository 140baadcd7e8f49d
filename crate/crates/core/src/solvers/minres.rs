//! Preconditioned MINRES for the stochastic Galerkin saddle-point system
//! `[Σ G_l⊗K_l, I⊗Bᵀ; I⊗B, 0]` with block-diagonal preconditioner
//! `diag(I⊗K̂, I⊗M̂)`.

use super::{SolveStats, SpatialPreconditioner};
use crate::error::{Error, Result};
use crate::lowrank::{Iterate, OperatorStack, SparseMatrix, TruncationSpec};

/// Velocity and pressure coefficient matrices of one saddle-point vector.
#[derive(Debug, Clone)]
pub struct BlockIterate<X> {
    pub u: X,
    pub p: X,
}

impl<X: Iterate> BlockIterate<X> {
    pub fn zeros(n_u: usize, n_p: usize, n_xi: usize) -> Self {
        BlockIterate {
            u: X::zeros(n_u, n_xi),
            p: X::zeros(n_p, n_xi),
        }
    }

    pub fn lincomb(terms: &[(f64, &Self)]) -> Self {
        let u: Vec<(f64, &X)> = terms.iter().map(|(c, b)| (*c, &b.u)).collect();
        let p: Vec<(f64, &X)> = terms.iter().map(|(c, b)| (*c, &b.p)).collect();
        BlockIterate {
            u: X::lincomb(&u),
            p: X::lincomb(&p),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        BlockIterate {
            u: self.u.scale(a),
            p: self.p.scale(a),
        }
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.u.inner(&other.u) + self.p.inner(&other.p)
    }

    pub fn norm(&self) -> f64 {
        self.u.norm().hypot(self.p.norm())
    }

    pub fn truncate(&self, spec: &TruncationSpec) -> Self {
        BlockIterate {
            u: self.u.truncate(spec),
            p: self.p.truncate(spec),
        }
    }

    pub fn rank(&self) -> usize {
        self.u.rank().max(self.p.rank())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinresConfig {
    pub max_iter: usize,
}

impl Default for MinresConfig {
    fn default() -> Self {
        MinresConfig { max_iter: 500 }
    }
}

/// The saddle-point operator together with its preconditioner.
#[derive(Debug)]
pub struct SaddleOperator {
    pub velocity: OperatorStack,
    pub divergence: SparseMatrix,
    divergence_t: SparseMatrix,
    pub velocity_precond: Box<dyn SpatialPreconditioner>,
    pub pressure_precond: Box<dyn SpatialPreconditioner>,
}

impl SaddleOperator {
    pub fn new(
        velocity: OperatorStack,
        divergence: SparseMatrix,
        velocity_precond: Box<dyn SpatialPreconditioner>,
        pressure_precond: Box<dyn SpatialPreconditioner>,
    ) -> Self {
        assert_eq!(divergence.ncols(), velocity.spatial_dim());
        SaddleOperator {
            divergence_t: divergence.transpose(),
            velocity,
            divergence,
            velocity_precond,
            pressure_precond,
        }
    }

    pub fn apply<X: Iterate>(&self, x: &BlockIterate<X>) -> BlockIterate<X> {
        let bt_p = x.p.map_left(|y| self.divergence_t.mul_dense(y));
        BlockIterate {
            u: X::lincomb(&[(1.0, &x.u.apply(&self.velocity)), (1.0, &bt_p)]),
            p: x.u.map_left(|y| self.divergence.mul_dense(y)),
        }
    }

    pub fn precondition<X: Iterate>(&self, x: &BlockIterate<X>) -> BlockIterate<X> {
        BlockIterate {
            u: x.u.map_left(|y| self.velocity_precond.apply(y)),
            p: x.p.map_left(|y| self.pressure_precond.apply(y)),
        }
    }

    /// Solves `A x = f` to relative preconditioned residual `tol`, truncating
    /// the Lanczos and update vectors with `trunc`.
    pub fn minres<X: Iterate>(
        &self,
        f: &BlockIterate<X>,
        tol: f64,
        trunc: &TruncationSpec,
        config: &MinresConfig,
    ) -> Result<(BlockIterate<X>, SolveStats)> {
        let (n_u, n_p, n_xi) = (f.u.nrows(), f.p.nrows(), f.u.ncols());
        let zero = BlockIterate::<X>::zeros(n_u, n_p, n_xi);
        let mut stats = SolveStats::default();

        let mut v_prev = zero.clone();
        let mut v = f.clone();
        let mut z = self.precondition(&v);
        let mut gamma = z.inner(&v).max(0.0).sqrt();
        let gamma1 = gamma;
        if gamma1 == 0.0 {
            return Ok((zero, stats));
        }
        let mut gamma_prev = 0.0;
        let mut eta = gamma;
        let (mut s_prev, mut s) = (0.0, 0.0);
        let (mut c_prev, mut c) = (1.0, 1.0);
        let mut w_prev = zero.clone();
        let mut w = zero.clone();
        let mut x = zero;

        for it in 1..=config.max_iter {
            z = z.scale(1.0 / gamma);
            let r = self.apply(&z).truncate(trunc);
            let delta = r.inner(&z);
            let mut terms = vec![(1.0, &r), (-delta / gamma, &v)];
            if gamma_prev > 0.0 {
                terms.push((-gamma / gamma_prev, &v_prev));
            }
            let v_next = BlockIterate::lincomb(&terms).truncate(trunc);
            let z_next = self.precondition(&v_next);
            let gamma_next = z_next.inner(&v_next).max(0.0).sqrt();

            let a0 = c * delta - c_prev * s * gamma;
            let a1 = (a0 * a0 + gamma_next * gamma_next).sqrt();
            let a2 = s * delta + c_prev * c * gamma;
            let a3 = s_prev * gamma;
            if a1 == 0.0 {
                return Err(Error::Breakdown("MINRES (singular Lanczos step)".into()));
            }
            let c_next = a0 / a1;
            let s_next = gamma_next / a1;

            let w_next = BlockIterate::lincomb(&[(1.0 / a1, &z), (-a3 / a1, &w_prev), (-a2 / a1, &w)]).truncate(trunc);
            x = BlockIterate::lincomb(&[(1.0, &x), (c_next * eta, &w_next)]).truncate(trunc);
            eta *= -s_next;

            stats.record(eta.abs() / gamma1, x.rank().max(v_next.rank()).max(w_next.rank()));

            v_prev = v;
            v = v_next;
            z = z_next;
            gamma_prev = gamma;
            gamma = gamma_next;
            w_prev = w;
            w = w_next;
            s_prev = s;
            s = s_next;
            c_prev = c;
            c = c_next;

            if eta.abs() <= tol * gamma1 || gamma == 0.0 {
                stats.iterations = it;
                let res = BlockIterate::lincomb(&[(1.0, f), (-1.0, &self.apply(&x))]);
                stats.true_residual = Some(res.norm() / f.norm());
                return Ok((x, stats));
            }
        }
        Err(Error::NonConvergence {
            solver: "low-rank MINRES",
            iterations: config.max_iter,
            residual: stats.final_residual(),
        })
    }
}
