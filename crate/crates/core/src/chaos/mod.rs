//! Generalized polynomial chaos: a total-degree Legendre basis in `m` uniform
//! variables, the Galerkin matrices `G_l`, triple products and sparse-grid
//! quadrature.

pub mod legendre;
mod sparse_grid;
mod triple;

use std::collections::HashMap;
use std::sync::OnceLock;

use faer::Mat;

use crate::lowrank::SparseMatrix;
pub use sparse_grid::SparseGrid;
pub use triple::TripleProducts;

/// Multi-indices of total degree `≤ p` in `m` variables, graded by degree.
///
/// Within one degree, indices are ordered lexicographically with larger
/// powers of earlier variables first, so index `l` (for `1 ≤ l ≤ m`) is the
/// unit vector of variable `l`.
#[derive(Debug)]
pub struct ChaosBasis {
    m: usize,
    p: usize,
    indices: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    triples: OnceLock<TripleProducts>,
}

impl ChaosBasis {
    pub fn new(m: usize, p: usize) -> Self {
        assert!(p < 256, "polynomial degree too large");
        let mut indices = Vec::new();
        let mut buf = vec![0u8; m];
        for deg in 0..=p {
            graded(deg, m, 0, &mut buf, &mut indices);
        }
        let lookup = indices.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        ChaosBasis {
            m,
            p,
            indices,
            lookup,
            triples: OnceLock::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn multi_index(&self, k: usize) -> &[u8] {
        &self.indices[k]
    }

    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// `ψ_k(ξ)` for every basis function.
    pub fn eval(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.m);
        let tables: Vec<Vec<f64>> = xi.iter().map(|&x| legendre::psi_all(self.p, x)).collect();
        self.indices
            .iter()
            .map(|a| a.iter().enumerate().map(|(l, &d)| tables[l][d as usize]).product())
            .collect()
    }

    /// Matrix `Ψ` with `Ψ[k, q] = ψ_k(ξ_q)`.
    pub fn eval_matrix(&self, points: &[Vec<f64>]) -> Mat<f64> {
        let mut psi = Mat::zeros(self.len(), points.len());
        for (q, x) in points.iter().enumerate() {
            for (k, v) in self.eval(x).into_iter().enumerate() {
                psi[(k, q)] = v;
            }
        }
        psi
    }

    /// `G_0 = I` and `[G_l]_{jk} = E[ξ_l ψ_j ψ_k]` for `l = 1..m`.
    pub fn galerkin_matrices(&self) -> Vec<SparseMatrix> {
        let n = self.len();
        let mut out = vec![SparseMatrix::identity(n)];
        for l in 0..self.m {
            let mut t = Vec::new();
            for (j, a) in self.indices.iter().enumerate() {
                if (a.iter().map(|&d| d as usize).sum::<usize>()) < self.p {
                    let mut b = a.clone();
                    b[l] += 1;
                    let k = self.lookup[&b];
                    let v = legendre::adjacent_moment(a[l] as usize);
                    t.push((j, k, v));
                    t.push((k, j, v));
                }
            }
            out.push(SparseMatrix::from_triplets(n, n, &t));
        }
        out
    }

    /// Triple products `E[ψ_r ψ_j ψ_k]`, built on first use.
    pub fn triple_products(&self) -> &TripleProducts {
        self.triples.get_or_init(|| TripleProducts::build(self))
    }
}

fn graded(deg: usize, m: usize, pos: usize, buf: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if m == 0 {
        // only the constant survives without random variables
        if deg == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == m - 1 {
        buf[pos] = deg as u8;
        out.push(buf.clone());
        return;
    }
    for d in (0..=deg).rev() {
        buf[pos] = d as u8;
        graded(deg - d, m, pos + 1, buf, out);
    }
    buf[pos] = 0;
}

/// `C(m + p, p)`.
pub fn basis_size(m: usize, p: usize) -> usize {
    let mut c: u128 = 1;
    for i in 0..p {
        c = c * (m + p - i) as u128 / (i as u128 + 1);
    }
    c as usize
}
