//! Monte Carlo reference solutions, sampling of stochastic Galerkin
//! surrogates and the mean relative errors between the two.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::ChaosBasis;
use crate::dense::{dot, norm2};
use crate::error::{Error, Result};
use crate::iteration::{rayleigh_ritz, DiffusionEigenProblem, EigenProblem, EigenSolution, StokesEigenProblem};
use crate::lowrank::Iterate;
use crate::solvers::eigs::{dense_smallest, schur_complement, sparse_smallest};

/// Parameter samples shared by the surrogate and the reference solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
}

impl SampleSet {
    /// `n_r` points uniform on `[-√3, √3]^m`. Sample `r` is drawn from its own
    /// ChaCha stream, so it does not depend on how many others are drawn.
    pub fn generate(m: usize, n_r: usize, seed: u64) -> Self {
        let a = 3f64.sqrt();
        let points = (0..n_r)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                (0..m).map(|_| rng.random_range(-a..a)).collect()
            })
            .collect();
        SampleSet { seed, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sample eigenpairs: `values[r][s]` and `vectors[r]` with eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SampledEigenpairs {
    pub values: Vec<Vec<f64>>,
    pub vectors: Vec<Mat<f64>>,
}

/// Deterministic eigensolve of one parameter sample.
pub trait SampleEigensolver: EigenProblem {
    /// Smallest `n_e` eigenpairs of the physical problem at `xi`, with
    /// mass-orthonormal eigenvectors.
    fn solve_sample(&self, xi: &[f64], n_e: usize, tol: f64, start: Option<&Mat<f64>>) -> Result<(Vec<f64>, Mat<f64>)>;
}

impl SampleEigensolver for DiffusionEigenProblem {
    fn solve_sample(&self, xi: &[f64], n_e: usize, tol: f64, start: Option<&Mat<f64>>) -> Result<(Vec<f64>, Mat<f64>)> {
        let k = self.problem.stiffness_at(xi);
        let res = sparse_smallest(&k, &self.problem.mass, n_e, tol, start.map(|s| s.as_ref()))?;
        Ok((res.values, res.vectors))
    }
}

impl SampleEigensolver for StokesEigenProblem {
    fn solve_sample(&self, xi: &[f64], n_e: usize, tol: f64, start: Option<&Mat<f64>>) -> Result<(Vec<f64>, Mat<f64>)> {
        let s = schur_complement(&self.problem.stiffness_at(xi), &self.problem.divergence)?;
        let res = dense_smallest(&s, &self.problem.pressure_mass.to_dense(), n_e, tol, start.map(|s| s.as_ref()))?;
        Ok((res.values, res.vectors))
    }
}

/// Monte Carlo reference: one deterministic eigensolve per sample, started
/// from the mean-problem eigenvectors.
pub fn mc_reference<P: SampleEigensolver>(
    problem: &P,
    samples: &SampleSet,
    n_e: usize,
    tol: f64,
) -> Result<SampledEigenpairs> {
    let m = problem.n_vars();
    let (_, start) = problem.solve_sample(&vec![0.0; m], n_e, tol, None)?;
    let solved: Vec<(Vec<f64>, Mat<f64>)> = samples
        .points
        .par_iter()
        .map(|xi| {
            if xi.len() != m {
                return Err(Error::DimensionMismatch(format!("sample has {} entries, expected {m}", xi.len())));
            }
            problem.solve_sample(xi, n_e, tol, Some(&start))
        })
        .collect::<Result<_>>()?;
    let (values, vectors) = solved.into_iter().unzip();
    Ok(SampledEigenpairs { values, vectors })
}

/// Evaluates the surrogate at the samples and maps eigenvectors to physical
/// space. With `refine`, each sample is post-processed by Rayleigh-Ritz on the
/// sampled subspace and the pairs come out in ascending order.
pub fn sg_sample<X: Iterate, P: EigenProblem>(
    solution: &EigenSolution<X>,
    basis: &ChaosBasis,
    problem: &P,
    samples: &SampleSet,
    refine: bool,
) -> SampledEigenpairs {
    let n_e = solution.eigvecs.len();
    let psi = basis.eval_matrix(&samples.points);
    let physical: Vec<Mat<f64>> = solution
        .eigvecs
        .iter()
        .map(|u| problem.to_physical(u.sample(psi.as_ref()).as_ref()))
        .collect();
    let n_x = physical.first().map_or(0, |p| p.nrows());
    let mut values = Vec::with_capacity(samples.len());
    let mut vectors = Vec::with_capacity(samples.len());
    for r in 0..samples.len() {
        let psi_r: Vec<f64> = (0..basis.len()).map(|k| psi[(k, r)]).collect();
        let u = Mat::from_fn(n_x, n_e, |i, s| physical[s][(i, r)]);
        if refine {
            let t = solution.ritz.eval(&psi_r);
            let (vals, vecs) = rayleigh_ritz(&t, u.as_ref());
            values.push(vals);
            vectors.push(vecs);
        } else {
            values.push(solution.eigvals.iter().map(|l| dot(l, &psi_r)).collect());
            vectors.push(u);
        }
    }
    SampledEigenpairs { values, vectors }
}

/// Mean relative errors of sampled eigenvalues and eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub n_samples: usize,
    pub refined: bool,
    /// `ε_{λ^s}` for each `s`.
    pub eigenvalue_errors: Vec<f64>,
    /// `ε_{u^s}` for each `s`, after sign alignment.
    pub eigenvector_errors: Vec<f64>,
}

/// Relative 2-norm distance of `u` to `reference` after flipping `u` so that
/// `⟨u, reference⟩ ≥ 0`.
pub fn aligned_error(u: &[f64], reference: &[f64]) -> f64 {
    let sign = if dot(u, reference) < 0.0 { -1.0 } else { 1.0 };
    let diff: Vec<f64> = u.iter().zip(reference).map(|(a, b)| sign * a - b).collect();
    norm2(&diff) / norm2(reference)
}

pub fn compare(sg: &SampledEigenpairs, mc: &SampledEigenpairs, refined: bool) -> Result<ErrorReport> {
    let n_r = mc.values.len();
    if sg.values.len() != n_r || n_r == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} surrogate samples against {} reference samples",
            sg.values.len(),
            n_r
        )));
    }
    let n_e = sg.values[0].len();
    if mc.values[0].len() < n_e {
        return Err(Error::DimensionMismatch("reference has fewer eigenpairs than the surrogate".into()));
    }
    let mut lam = vec![0.0; n_e];
    let mut vec_err = vec![0.0; n_e];
    for r in 0..n_r {
        for s in 0..n_e {
            let (a, b) = (sg.values[r][s], mc.values[r][s]);
            lam[s] += (a - b).abs() / b.abs();
            let u = sg.vectors[r].col(s).iter().copied().collect::<Vec<_>>();
            let v = mc.vectors[r].col(s).iter().copied().collect::<Vec<_>>();
            vec_err[s] += aligned_error(&u, &v);
        }
    }
    let n = n_r as f64;
    Ok(ErrorReport {
        n_samples: n_r,
        refined,
        eigenvalue_errors: lam.into_iter().map(|x| x / n).collect(),
        eigenvector_errors: vec_err.into_iter().map(|x| x / n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_reproducible_and_in_range() {
        let a = SampleSet::generate(5, 20, 7);
        let b = SampleSet::generate(5, 30, 7);
        assert_eq!(a.points[..], b.points[..20]);
        let c = SampleSet::generate(5, 20, 8);
        assert_ne!(a.points, c.points);
        let bound = 3f64.sqrt();
        assert!(a.points.iter().flatten().all(|x| x.abs() <= bound));
    }

    #[test]
    fn sign_alignment_is_idempotent_and_never_hurts() {
        let v = [1.0, -2.0, 0.5];
        let u = [-1.1, 2.0, -0.4];
        let flipped: Vec<f64> = u.iter().map(|x| -x).collect();
        let e = aligned_error(&u, &v);
        assert_eq!(e, aligned_error(&flipped, &v));
        let raw = norm2(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm2(&v);
        assert!(e <= raw);
    }

    #[test]
    fn identical_inputs_give_zero_error() {
        let s = SampledEigenpairs {
            values: vec![vec![1.0, 2.0]; 3],
            vectors: vec![Mat::from_fn(4, 2, |i, j| (i + j) as f64 + 1.0); 3],
        };
        let rep = compare(&s, &s, false).unwrap();
        assert!(rep.eigenvalue_errors.iter().chain(&rep.eigenvector_errors).all(|&e| e == 0.0));
    }
}
