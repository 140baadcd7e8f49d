use faer::MatRef;

use super::legendre::{gauss_legendre, psi_all};
use super::ChaosBasis;

/// Nonzero triple products `E[ψ_r ψ_j ψ_k]`, grouped by `r`.
///
/// A product is nonzero exactly when, in every variable,
/// `|j_l - k_l| ≤ r_l ≤ j_l + k_l` and `r_l + j_l + k_l` is even.
#[derive(Debug, Clone)]
pub struct TripleProducts {
    by_r: Vec<Vec<(u32, u32, f64)>>,
}

impl TripleProducts {
    pub fn build(basis: &ChaosBasis) -> Self {
        let p = basis.degree();
        let t1 = one_dim_table(p);
        let n = basis.len();
        let mut by_r: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); n];
        let mut r = vec![0u8; basis.n_vars()];

        for j in 0..n {
            for k in 0..n {
                let a = basis.multi_index(j);
                let b = basis.multi_index(k);
                let support: Vec<usize> = (0..a.len()).filter(|&l| a[l] + b[l] > 0).collect();
                r.iter_mut().for_each(|x| *x = 0);
                enumerate(&support, 0, a, b, p, &mut r, &mut |r| {
                    let ri = basis.position(r).expect("index within total degree");
                    let v: f64 = support
                        .iter()
                        .map(|&l| t1[r[l] as usize][a[l] as usize][b[l] as usize])
                        .product();
                    by_r[ri].push((j as u32, k as u32, v));
                });
            }
        }
        TripleProducts { by_r }
    }

    /// Number of stored `(r, j, k)` triples.
    pub fn count(&self) -> usize {
        self.by_r.iter().map(Vec::len).sum()
    }

    pub fn entries(&self, r: usize) -> &[(u32, u32, f64)] {
        &self.by_r[r]
    }

    pub fn len(&self) -> usize {
        self.by_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_r.is_empty()
    }

    /// `⟨G̃_r, H⟩_F = Σ_{jk} E[ψ_r ψ_j ψ_k] H_{jk}`.
    pub fn contract(&self, r: usize, h: MatRef<'_, f64>) -> f64 {
        self.by_r[r]
            .iter()
            .map(|&(j, k, v)| v * h[(j as usize, k as usize)])
            .sum()
    }
}

fn enumerate(
    support: &[usize],
    pos: usize,
    a: &[u8],
    b: &[u8],
    budget: usize,
    r: &mut Vec<u8>,
    f: &mut impl FnMut(&[u8]),
) {
    if pos == support.len() {
        f(r);
        return;
    }
    let l = support[pos];
    let lo = a[l].abs_diff(b[l]) as usize;
    let hi = (a[l] + b[l]) as usize;
    let mut v = lo;
    while v <= hi && v <= budget {
        r[l] = v as u8;
        enumerate(support, pos + 1, a, b, budget - v, r, f);
        v += 2;
    }
    r[l] = 0;
}

/// `t[r][a][b] = E[ψ_r ψ_a ψ_b]` in one variable, by Gauss quadrature.
fn one_dim_table(p: usize) -> Vec<Vec<Vec<f64>>> {
    let (x, w) = gauss_legendre(2 * p + 2);
    let s3 = 3f64.sqrt();
    let vals: Vec<Vec<f64>> = x.iter().map(|&t| psi_all(p, s3 * t)).collect();
    let mut t = vec![vec![vec![0.0; p + 1]; p + 1]; p + 1];
    for r in 0..=p {
        for a in 0..=p {
            for b in 0..=p {
                t[r][a][b] = vals.iter().zip(&w).map(|(v, w)| 0.5 * w * v[r] * v[a] * v[b]).sum();
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::SparseGrid;

    #[test]
    fn matches_quadrature_and_sparsity_rule() {
        let basis = ChaosBasis::new(2, 3);
        let grid = SparseGrid::new(2, 6);
        let psi = basis.eval_matrix(grid.points());
        let tp = basis.triple_products();
        let n = basis.len();
        for r in 0..n {
            let mut dense = vec![vec![0.0; n]; n];
            for &(j, k, v) in tp.entries(r) {
                dense[j as usize][k as usize] = v;
            }
            for j in 0..n {
                for k in 0..n {
                    let q: f64 = (0..grid.len())
                        .map(|i| grid.weights()[i] * psi[(r, i)] * psi[(j, i)] * psi[(k, i)])
                        .sum();
                    assert!((q - dense[j][k]).abs() < 1e-12, "r={r} j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn first_slice_is_identity_and_degree_one_slices_are_g() {
        let basis = ChaosBasis::new(3, 2);
        let tp = basis.triple_products();
        assert_eq!(tp.entries(0).len(), basis.len());
        assert!(tp.entries(0).iter().all(|&(j, k, v)| j == k && (v - 1.0).abs() < 1e-14));
        let g = basis.galerkin_matrices();
        for l in 1..=3 {
            // ψ_l(ξ) = ξ_l, so E[ψ_l ψ_j ψ_k] = [G_l]_{jk}
            for &(j, k, v) in tp.entries(l) {
                assert!((g[l].get(j as usize, k as usize) - v).abs() < 1e-14);
            }
            assert_eq!(tp.entries(l).len(), g[l].nnz());
        }
    }
}
