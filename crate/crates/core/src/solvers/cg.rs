use super::{SolveStats, SpatialPreconditioner};
use crate::error::{Error, Result};
use crate::lowrank::{Iterate, OperatorStack, TruncationSpec};

#[derive(Debug, Clone, Copy)]
pub struct CgConfig {
    pub max_iter: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig { max_iter: 500 }
    }
}

/// Preconditioned conjugate gradients for `Σ G_l ⊗ K_l x = f` with the
/// mean-based preconditioner `I ⊗ K̂⁻¹`. The iterate, residual, search
/// direction and operator image are truncated with `trunc` every step.
pub fn pcg<X: Iterate>(
    ops: &OperatorStack,
    precond: &dyn SpatialPreconditioner,
    f: &X,
    tol: f64,
    trunc: &TruncationSpec,
    config: &CgConfig,
) -> Result<(X, SolveStats)> {
    let mut stats = SolveStats::default();
    let fnorm = f.norm();
    let mut x = X::zeros(f.nrows(), f.ncols());
    if fnorm == 0.0 {
        return Ok((x, stats));
    }
    let mut r = f.clone();
    let mut z = r.map_left(|y| precond.apply(y));
    let mut p = z.clone();
    let mut rho = r.inner(&z);
    for it in 1..=config.max_iter {
        let q = p.apply(ops).truncate(trunc);
        let pq = p.inner(&q);
        if !(pq > 0.0) {
            return Err(Error::Breakdown("CG (operator not positive definite)".into()));
        }
        let alpha = rho / pq;
        x = X::lincomb(&[(1.0, &x), (alpha, &p)]).truncate(trunc);
        r = X::lincomb(&[(1.0, &r), (-alpha, &q)]).truncate(trunc);
        let res = r.norm() / fnorm;
        stats.record(res, x.rank().max(r.rank()).max(p.rank()));
        if res <= tol {
            stats.iterations = it;
            return Ok((x, stats));
        }
        z = r.map_left(|y| precond.apply(y));
        let rho_next = r.inner(&z);
        p = X::lincomb(&[(1.0, &z), (rho_next / rho, &p)]).truncate(trunc);
        rho = rho_next;
    }
    Err(Error::NonConvergence {
        solver: "low-rank CG",
        iterations: config.max_iter,
        residual: stats.final_residual(),
    })
}
