use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::{EigenProblem, Quadrature};
use crate::chaos::{ChaosBasis, TripleProducts};
use crate::dense::jacobi_eig;
use crate::error::Result;
use crate::lowrank::{Iterate, TruncationSpec};

/// Chaos coefficients of `ξ ↦ u(ξ)ᵀ w(ξ)` from `H = Uᵀ W`.
pub fn product_expansion(triples: &TripleProducts, h: MatRef<'_, f64>) -> Vec<f64> {
    (0..triples.len()).map(|r| triples.contract(r, h)).collect()
}

/// Chaos coefficients of the Rayleigh quotient `λ(ξ) = u(ξ)ᵀ A(ξ) u(ξ)`.
pub fn rayleigh_quotient<X: Iterate, P: EigenProblem>(
    u: &X,
    problem: &P,
    basis: &ChaosBasis,
    post: &TruncationSpec,
) -> Result<Vec<f64>> {
    let w = problem.operator_apply(u, post)?;
    Ok(product_expansion(basis.triple_products(), u.cross_gram(&w).as_ref()))
}

/// Chaos expansion of the projected matrix `T(ξ)` with `T_st = u^s(ξ)ᵀ A(ξ) u^t(ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RitzExpansion {
    pub n_e: usize,
    /// `coefficients[s * n_e + t]` holds the expansion of `T_st`.
    pub coefficients: Vec<Vec<f64>>,
}

impl RitzExpansion {
    pub fn build<X: Iterate, P: EigenProblem>(
        us: &[X],
        problem: &P,
        basis: &ChaosBasis,
        post: &TruncationSpec,
    ) -> Result<Self> {
        let n_e = us.len();
        let ws: Vec<X> = us.iter().map(|u| problem.operator_apply(u, post)).collect::<Result<_>>()?;
        let triples = basis.triple_products();
        let mut coefficients = vec![Vec::new(); n_e * n_e];
        for s in 0..n_e {
            for t in s..n_e {
                let st = product_expansion(triples, us[s].cross_gram(&ws[t]).as_ref());
                let c = if s == t {
                    st
                } else {
                    let ts = product_expansion(triples, us[t].cross_gram(&ws[s]).as_ref());
                    st.iter().zip(&ts).map(|(a, b)| 0.5 * (a + b)).collect()
                };
                coefficients[t * n_e + s] = c.clone();
                coefficients[s * n_e + t] = c;
            }
        }
        Ok(RitzExpansion { n_e, coefficients })
    }

    /// Expansion of the Rayleigh quotient of `u^s`.
    pub fn diagonal(&self, s: usize) -> &[f64] {
        &self.coefficients[s * self.n_e + s]
    }

    /// `T(ξ)` given the basis values `ψ(ξ)`.
    pub fn eval(&self, psi: &[f64]) -> Mat<f64> {
        Mat::from_fn(self.n_e, self.n_e, |s, t| {
            crate::dense::dot(&self.coefficients[s * self.n_e + t], psi)
        })
    }
}

/// Refined sample eigenpairs: eigenvalues of `T(ξ)` in ascending order and
/// the Ritz vectors `[u^1(ξ) … u^{n_e}(ξ)] W`.
pub fn rayleigh_ritz(t: &Mat<f64>, samples: MatRef<'_, f64>) -> (Vec<f64>, Mat<f64>) {
    let (values, w) = jacobi_eig(t.as_ref());
    (values, samples * &w)
}

/// Mean of a chaos expansion evaluated at the quadrature points.
pub fn quadrature_mean(coefficients: &[f64], quad: &Quadrature) -> f64 {
    (0..quad.len())
        .map(|q| quad.weights[q] * crate::dense::dot(coefficients, quad.psi.col_as_slice(q)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_ritz_is_the_quotient() {
        let t = Mat::from_fn(1, 1, |_, _| 4.5);
        let u = Mat::from_fn(3, 1, |i, _| i as f64);
        let (vals, vecs) = rayleigh_ritz(&t, u.as_ref());
        assert_eq!(vals, vec![4.5]);
        assert!((vecs.col(0).norm_l2() - u.col(0).norm_l2()).abs() < 1e-15);
    }

    #[test]
    fn ritz_values_are_ascending_eigenvalues() {
        let t = Mat::from_fn(2, 2, |i, j| if i == j { 3.0 - i as f64 } else { 0.5 });
        let u = Mat::<f64>::identity(4, 2);
        let (vals, vecs) = rayleigh_ritz(&t, u.as_ref());
        assert!(vals[0] < vals[1]);
        let tv = &t * vecs.subrows(0, 2);
        for s in 0..2 {
            for i in 0..2 {
                assert!((tv[(i, s)] - vals[s] * vecs[(i, s)]).abs() < 1e-12);
            }
        }
    }
}
