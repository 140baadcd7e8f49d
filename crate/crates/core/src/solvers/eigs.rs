//! Deterministic generalized eigensolvers for single parameter samples.

use faer::{Mat, MatRef, Side};
use faer::linalg::solvers::Solve;

use crate::dense::generalized_sym_eig;
use crate::discretize::EnvelopeCholesky;
use crate::error::{Error, Result};
use crate::lowrank::SparseMatrix;

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Smallest eigenvalues, ascending.
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors as columns.
    pub vectors: Mat<f64>,
    pub iterations: usize,
}

/// Smallest `n_e` eigenpairs of `A x = λ M x` (both SPD) by subspace
/// iteration with `A⁻¹ M`, `guard` extra vectors and Rayleigh-Ritz each step.
///
/// Converged when `‖A x - λ M x‖ ≤ tol · λ ‖M x‖` for every wanted pair.
#[allow(clippy::too_many_arguments)]
pub fn subspace_iteration(
    n: usize,
    apply_a: &dyn Fn(MatRef<'_, f64>) -> Mat<f64>,
    apply_m: &dyn Fn(MatRef<'_, f64>) -> Mat<f64>,
    solve_a: &dyn Fn(MatRef<'_, f64>) -> Mat<f64>,
    n_e: usize,
    guard: usize,
    tol: f64,
    max_iter: usize,
    start: Option<MatRef<'_, f64>>,
) -> Result<EigenResult> {
    let b = (n_e + guard).min(n);
    if n_e == 0 || n_e > n {
        return Err(Error::Config(format!("cannot compute {n_e} eigenpairs of a {n}-dimensional problem")));
    }
    let mut x = Mat::from_fn(n, b, |i, j| {
        // deterministic pseudo-random start vectors (splitmix64)
        let mut z = (i as u64).wrapping_mul(0x9E3779B97F4A7C15) ^ (j as u64).wrapping_mul(0xD1B54A32D192ED03);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    if let Some(s) = start {
        let k = s.ncols().min(b);
        x.subcols_mut(0, k).copy_from(s.subcols(0, k));
    }
    let mut worst = f64::INFINITY;
    for it in 1..=max_iter {
        let mx = apply_m(x.as_ref());
        let y = solve_a(mx.as_ref());
        let my = apply_m(y.as_ref());
        // Yᵀ A Y = Yᵀ M X since A Y = M X
        let ap = y.transpose() * &mx;
        let mp = y.transpose() * &my;
        let sym = |a: &Mat<f64>| Mat::from_fn(b, b, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let (theta, w) = generalized_sym_eig(sym(&ap).as_ref(), sym(&mp).as_ref())?;
        x = &y * &w;

        let ax = apply_a(x.subcols(0, n_e));
        let mxn = apply_m(x.subcols(0, n_e));
        worst = 0.0;
        for s in 0..n_e {
            let mut r2 = 0.0;
            let mut m2 = 0.0;
            for i in 0..n {
                let r = ax[(i, s)] - theta[s] * mxn[(i, s)];
                r2 += r * r;
                m2 += mxn[(i, s)] * mxn[(i, s)];
            }
            worst = worst.max(r2.sqrt() / (theta[s].abs() * m2.sqrt()));
        }
        if worst <= tol {
            return Ok(EigenResult {
                values: theta[..n_e].to_vec(),
                vectors: x.subcols(0, n_e).to_owned(),
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "subspace iteration",
        iterations: max_iter,
        residual: worst,
    })
}

/// Sparse convenience wrapper: smallest eigenpairs of `K x = λ M x`.
pub fn sparse_smallest(
    k: &SparseMatrix,
    m: &SparseMatrix,
    n_e: usize,
    tol: f64,
    start: Option<MatRef<'_, f64>>,
) -> Result<EigenResult> {
    let chol = EnvelopeCholesky::factor(k)?;
    subspace_iteration(
        k.nrows(),
        &|x| k.mul_dense(x),
        &|x| m.mul_dense(x),
        &|x| chol.solve(x),
        n_e,
        4,
        tol,
        1000,
        start,
    )
}

/// Dense Schur complement `B K⁻¹ Bᵀ`.
pub fn schur_complement(k: &SparseMatrix, b: &SparseMatrix) -> Result<Mat<f64>> {
    let chol = EnvelopeCholesky::factor(k)?;
    let kinv_bt = chol.solve(b.transpose().to_dense().as_ref());
    let s = b.mul_dense(kinv_bt.as_ref());
    let n = s.nrows();
    Ok(Mat::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)])))
}

/// Smallest eigenpairs of the dense pencil `S q = λ M q`.
pub fn dense_smallest(
    s: &Mat<f64>,
    m: &Mat<f64>,
    n_e: usize,
    tol: f64,
    start: Option<MatRef<'_, f64>>,
) -> Result<EigenResult> {
    let llt = s.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite { pivot: 0 })?;
    subspace_iteration(
        s.nrows(),
        &|x| s * x,
        &|x| m * x,
        &|x| llt.solve(x),
        n_e,
        4,
        tol,
        1000,
        start,
    )
}
