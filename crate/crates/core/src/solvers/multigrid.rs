//! Multigrid for the stochastic Galerkin system `Σ G_l ⊗ K_l x = f` with
//! low-rank iterates.
//!
//! The smoother is damped block Jacobi with the mean operator, `I ⊗ K_0⁻¹`.
//! Inside a cycle every smoothed iterate and residual is truncated with a
//! relative tolerance. The outer iteration truncates with an absolute one.

use faer::Mat;

use super::{KroneckerDirect, SolveStats};
use crate::discretize::{EnvelopeCholesky, Hierarchy};
use crate::error::{Error, Result};
use crate::lowrank::{Iterate, OperatorStack, SparseMatrix, TruncationSpec};

#[derive(Debug, Clone, Copy)]
pub struct MultigridConfig {
    pub omega: f64,
    pub smoothing_steps: usize,
    pub max_iter: usize,
}

impl Default for MultigridConfig {
    fn default() -> Self {
        MultigridConfig {
            omega: 2.0 / 3.0,
            smoothing_steps: 2,
            max_iter: 50,
        }
    }
}

/// Tolerances of one multigrid solve.
#[derive(Debug, Clone, Copy)]
pub struct MultigridTolerances {
    /// Target relative residual.
    pub tol: f64,
    /// Absolute truncation of the outer iterate and residual.
    pub eps_abs: f64,
    /// Relative truncation inside cycles.
    pub eps_rel: f64,
}

#[derive(Debug)]
struct Level {
    ops: OperatorStack,
    tail: Option<OperatorStack>,
    k0: EnvelopeCholesky,
    prolongation: Option<SparseMatrix>,
    restriction: Option<SparseMatrix>,
}

#[derive(Debug)]
pub struct LowRankMultigrid {
    levels: Vec<Level>,
    coarse: KroneckerDirect,
    config: MultigridConfig,
}

impl LowRankMultigrid {
    /// `g` holds `G_0 = I, G_1, …, G_m` matching the stiffness matrices of every level.
    pub fn new(hierarchy: &Hierarchy, g: &[SparseMatrix], config: MultigridConfig) -> Result<Self> {
        let mut levels = Vec::new();
        for lv in &hierarchy.levels {
            if lv.stiffness.len() != g.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} spatial terms but {} stochastic terms",
                    lv.stiffness.len(),
                    g.len()
                )));
            }
            let ops = OperatorStack::from_parts(g, &lv.stiffness);
            levels.push(Level {
                tail: ops.tail(),
                k0: EnvelopeCholesky::factor(&lv.stiffness[0])?,
                ops,
                prolongation: lv.prolongation.clone(),
                restriction: lv.restriction.clone(),
            });
        }
        let coarse = KroneckerDirect::new(&levels[0].ops)?;
        Ok(LowRankMultigrid { levels, coarse, config })
    }

    /// Operator on the finest level.
    pub fn operator(&self) -> &OperatorStack {
        &self.levels.last().unwrap().ops
    }

    pub fn solve<X: Iterate>(&self, f: &X, tols: &MultigridTolerances) -> Result<(X, SolveStats)> {
        let ops = self.operator();
        let fnorm = f.norm();
        let mut stats = SolveStats::default();
        let mut x = X::zeros(f.nrows(), f.ncols());
        if fnorm == 0.0 {
            return Ok((x, stats));
        }
        let outer = TruncationSpec::absolute(tols.eps_abs);
        let inner = TruncationSpec::relative(tols.eps_rel);
        let top = self.levels.len() - 1;
        let mut r = f.clone();
        for it in 1..=self.config.max_iter {
            let c = self.vcycle(top, &r, &inner);
            x = X::lincomb(&[(1.0, &x), (1.0, &c)]).truncate(&outer);
            r = X::lincomb(&[(1.0, f), (-1.0, &x.apply(ops))]).truncate(&outer);
            let res = r.norm() / fnorm;
            stats.record(res, x.rank().max(r.rank()));
            if res <= tols.tol {
                stats.iterations = it;
                return Ok((x, stats));
            }
        }
        Err(Error::NonConvergence {
            solver: "low-rank multigrid",
            iterations: self.config.max_iter,
            residual: stats.final_residual(),
        })
    }

    fn vcycle<X: Iterate>(&self, lev: usize, f: &X, tr: &TruncationSpec) -> X {
        if lev == 0 {
            let d = self.coarse.solve(f.to_dense().as_ref());
            return X::from_dense(d.as_ref(), tr);
        }
        let l = &self.levels[lev];
        let k0f = f.map_left(|y| l.k0.solve(y));
        let x = self.smooth(l, None, &k0f, tr);
        let r = X::lincomb(&[(1.0, f), (-1.0, &x.apply(&l.ops))]).truncate(tr);
        let rc = r.map_left(|y| l.restriction.as_ref().unwrap().mul_dense(y));
        let cc = self.vcycle(lev - 1, &rc, tr);
        let x = X::lincomb(&[(1.0, &x), (1.0, &cc.map_left(|y| l.prolongation.as_ref().unwrap().mul_dense(y)))]);
        self.smooth(l, Some(x), &k0f, tr)
    }

    /// `ν` steps of `X ← X + ω K_0⁻¹ (F - A X)`, written as
    /// `(1-ω) X + ω K_0⁻¹ F - ω Σ_{l≥1} K_0⁻¹ K_l X G_lᵀ` so the mean term
    /// does not inflate the rank. `k0f` is `K_0⁻¹ F`.
    fn smooth<X: Iterate>(&self, l: &Level, x0: Option<X>, k0f: &X, tr: &TruncationSpec) -> X {
        let w = self.config.omega;
        let mut x = x0;
        for _ in 0..self.config.smoothing_steps {
            let next = match &x {
                None => k0f.scale(w),
                Some(x) => match &l.tail {
                    Some(tail) => {
                        let t = x.apply(tail).map_left(|y| l.k0.solve(y));
                        X::lincomb(&[(1.0 - w, x), (w, k0f), (-w, &t)])
                    }
                    None => X::lincomb(&[(1.0 - w, x), (w, k0f)]),
                },
            };
            x = Some(next.truncate(tr));
        }
        x.unwrap_or_else(|| X::zeros(k0f.nrows(), k0f.ncols()))
    }
}

/// Dense coefficient matrix of the exact Kronecker solution, for checks.
pub fn dense_solve(ops: &OperatorStack, f: &Mat<f64>) -> Result<Mat<f64>> {
    Ok(KroneckerDirect::new(ops)?.solve(f.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::ChaosBasis;
    use crate::discretize::Discretization;
    use crate::lowrank::{FactoredMatrix, FullMatrix};
    use crate::randfield::{KlExpansion, KlTruncation};

    fn setup(n_c: usize, m: usize, p: usize, sigma: f64) -> (LowRankMultigrid, usize, usize) {
        let kl = KlExpansion::new(4.0, sigma, KlTruncation::Fixed(m)).unwrap();
        let h = Hierarchy::build(Discretization::Diffusion, n_c, 1, &kl).unwrap();
        let g = ChaosBasis::new(m, p).galerkin_matrices();
        let nx = h.finest().stiffness[0].nrows();
        let nxi = g[0].nrows();
        (LowRankMultigrid::new(&h, &g, MultigridConfig::default()).unwrap(), nx, nxi)
    }

    #[test]
    fn exact_mode_matches_kronecker_solve() {
        let (mg, nx, nxi) = setup(4, 2, 2, 0.05);
        let f = FactoredMatrix::new(
            Mat::from_fn(nx, 2, |i, j| ((i + 1) as f64 * (j + 1) as f64 * 0.1).sin()),
            Mat::from_fn(nxi, 2, |k, j| if k == j { 1.0 } else { 0.1 }),
        );
        let tols = MultigridTolerances { tol: 1e-12, eps_abs: 0.0, eps_rel: 0.0 };
        let (x, stats) = mg.solve(&f, &tols).unwrap();
        let exact = dense_solve(mg.operator(), &f.to_dense()).unwrap();
        assert!((x.to_dense() - &exact).norm_l2() <= 1e-8 * exact.norm_l2());
        assert!(stats.iterations < 20);

        let (xf, _) = mg.solve(&FullMatrix(f.to_dense()), &tols).unwrap();
        assert!((xf.0 - &exact).norm_l2() <= 1e-8 * exact.norm_l2());
    }

    #[test]
    fn convergence_rate_independent_of_mesh() {
        let mut its = Vec::new();
        for n_c in [3, 5] {
            let (mg, nx, nxi) = setup(n_c, 3, 2, 0.01);
            let f = FactoredMatrix::rank_one(&vec![1.0; nx], &(0..nxi).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>());
            let tols = MultigridTolerances { tol: 1e-8, eps_abs: 0.0, eps_rel: 0.0 };
            let (_, stats) = mg.solve(&f, &tols).unwrap();
            its.push(stats.iterations);
        }
        assert!(its[1] <= its[0] + 2, "{its:?}");
        assert!(its[1] <= 12);
    }

    #[test]
    fn truncated_solve_keeps_low_rank() {
        let (mg, nx, nxi) = setup(5, 4, 3, 0.01);
        let f = FactoredMatrix::rank_one(&vec![0.01; nx], &(0..nxi).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        let tols = MultigridTolerances { tol: 1e-6, eps_abs: 1e-8, eps_rel: 1e-2 };
        let (x, _) = mg.solve(&f, &tols).unwrap();
        let strict = MultigridTolerances { tol: 1e-12, eps_abs: 0.0, eps_rel: 0.0 };
        let exact = mg.solve(&FullMatrix(f.to_dense()), &strict).unwrap().0 .0;
        let sv = FactoredMatrix::from_dense(exact.as_ref(), &TruncationSpec::exact()).singular_values();
        let numerical_rank = sv.iter().filter(|&&s| s >= tols.eps_abs).count();
        assert!(x.rank() <= numerical_rank + 2, "rank {} vs {numerical_rank}", x.rank());
        assert!((x.to_dense() - &exact).norm_l2() <= 1e-4 * exact.norm_l2());
    }
}
