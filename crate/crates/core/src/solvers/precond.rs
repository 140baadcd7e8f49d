//! Spatial preconditioners applied blockwise as `I ⊗ K̂⁻¹`.

use faer::{Mat, MatRef};

use crate::discretize::{EnvelopeCholesky, Hierarchy};
use crate::error::Result;
use crate::lowrank::SparseMatrix;

pub trait SpatialPreconditioner: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;
    /// Applies the preconditioner to every column of `r`.
    fn apply(&self, r: MatRef<'_, f64>) -> Mat<f64>;
}

impl SpatialPreconditioner for EnvelopeCholesky {
    fn dim(&self) -> usize {
        EnvelopeCholesky::dim(self)
    }

    fn apply(&self, r: MatRef<'_, f64>) -> Mat<f64> {
        self.solve(r)
    }
}

#[derive(Debug, Clone)]
pub struct IdentityPreconditioner(pub usize);

impl SpatialPreconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, r: MatRef<'_, f64>) -> Mat<f64> {
        r.to_owned()
    }
}

/// Multiplication by a fixed diagonal, e.g. the inverse of a lumped mass.
#[derive(Debug, Clone)]
pub struct DiagonalPreconditioner {
    pub inv_diag: Vec<f64>,
}

impl DiagonalPreconditioner {
    pub fn inverse_of(a: &SparseMatrix) -> Self {
        DiagonalPreconditioner {
            inv_diag: a.diagonal().iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl SpatialPreconditioner for DiagonalPreconditioner {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply(&self, r: MatRef<'_, f64>) -> Mat<f64> {
        Mat::from_fn(r.nrows(), r.ncols(), |i, j| self.inv_diag[i] * r[(i, j)])
    }
}

#[derive(Debug, Clone)]
struct GmgLevel {
    k: SparseMatrix,
    inv_diag: Vec<f64>,
    omega: f64,
    prolongation: Option<SparseMatrix>,
    restriction: Option<SparseMatrix>,
}

/// One geometric V-cycle for the mean operator `K_0`, started from zero.
/// Pre- and post-smoothing are the same damped Jacobi sweeps, so the cycle is
/// a symmetric positive definite operator.
#[derive(Debug, Clone)]
pub struct GeometricMultigrid {
    levels: Vec<GmgLevel>,
    coarse: EnvelopeCholesky,
    sweeps: usize,
}

impl GeometricMultigrid {
    /// Damping is `omega_scale / λ_max(D⁻¹K)` per level, with `λ_max` from power iteration.
    /// For Q1 Laplacians `λ_max ≈ 3/2`, so `omega_scale = 1` gives the classical `2/3`.
    pub fn new(h: &Hierarchy, sweeps: usize, omega_scale: f64) -> Result<Self> {
        let coarse = EnvelopeCholesky::factor(&h.levels[0].stiffness[0])?;
        let levels = h
            .levels
            .iter()
            .map(|lv| {
                let k = lv.stiffness[0].clone();
                let inv_diag: Vec<f64> = k.diagonal().iter().map(|d| 1.0 / d).collect();
                let lmax = jacobi_spectral_radius(&k, &inv_diag);
                GmgLevel {
                    k,
                    inv_diag,
                    omega: omega_scale / lmax,
                    prolongation: lv.prolongation.clone(),
                    restriction: lv.restriction.clone(),
                }
            })
            .collect();
        Ok(GeometricMultigrid { levels, coarse, sweeps })
    }

    fn vcycle(&self, lev: usize, b: &[f64]) -> Vec<f64> {
        if lev == 0 {
            let mut x = b.to_vec();
            self.coarse.solve_in_place(&mut x);
            return x;
        }
        let l = &self.levels[lev];
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        for _ in 0..self.sweeps {
            self.jacobi(l, b, &mut x, &mut r);
        }
        let restriction = l.restriction.as_ref().expect("fine levels carry transfers");
        let rc = restriction.mul_vec(&r);
        let ec = self.vcycle(lev - 1, &rc);
        let e = l.prolongation.as_ref().unwrap().mul_vec(&ec);
        x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
        for _ in 0..self.sweeps {
            l.k.matvec(&x, &mut r);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            self.jacobi(l, b, &mut x, &mut r);
        }
        x
    }

    /// One damped Jacobi sweep; `r` holds `b - Kx` on entry and on exit.
    fn jacobi(&self, l: &GmgLevel, b: &[f64], x: &mut [f64], r: &mut [f64]) {
        for i in 0..x.len() {
            x[i] += l.omega * l.inv_diag[i] * r[i];
        }
        l.k.matvec(x, r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    }
}

fn jacobi_spectral_radius(k: &SparseMatrix, inv_diag: &[f64]) -> f64 {
    let n = k.nrows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut lambda = 1.0;
    for _ in 0..50 {
        let mut w = k.mul_vec(&v);
        w.iter_mut().zip(inv_diag).for_each(|(wi, d)| *wi *= d);
        let nrm = crate::dense::norm2(&w);
        lambda = nrm / crate::dense::norm2(&v);
        v = w.into_iter().map(|x| x / nrm).collect();
    }
    // power iteration underestimates; a small margin keeps the smoother contractive
    1.05 * lambda
}

impl SpatialPreconditioner for GeometricMultigrid {
    fn dim(&self) -> usize {
        self.levels.last().unwrap().k.nrows()
    }

    fn apply(&self, r: MatRef<'_, f64>) -> Mat<f64> {
        let top = self.levels.len() - 1;
        let mut out = Mat::zeros(r.nrows(), r.ncols());
        for j in 0..r.ncols() {
            let b: Vec<f64> = (0..r.nrows()).map(|i| r[(i, j)]).collect();
            out.col_as_slice_mut(j).copy_from_slice(&self.vcycle(top, &b));
        }
        out
    }
}
