//! Compressed sparse row matrices.

use faer::{Mat, MatRef};

use crate::dense::dot;

/// A real sparse matrix in CSR layout with sorted, duplicate-free columns per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < scratch.len() {
                let j = scratch[k].0;
                let mut v = 0.0;
                while k < scratch.len() && scratch[k].0 == j {
                    v += scratch[k].1;
                    k += 1;
                }
                col_idx.push(j);
                out_vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals: out_vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let n = d.len();
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: d.to_vec(),
        }
    }

    pub fn from_dense(a: MatRef<'_, f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values stored in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut s = 0.0;
            for k in r {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Sparse times dense, `A X`.
    pub fn mul_dense(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.ncols, "sparse-dense product shape mismatch");
        let mut out = Mat::zeros(self.nrows, x.ncols());
        let mut buf = vec![0.0; self.ncols];
        for j in 0..x.ncols() {
            let col: &[f64] = match x.col(j).try_as_col_major() {
                Some(c) => c.as_slice(),
                None => {
                    for i in 0..self.ncols {
                        buf[i] = x[(i, j)];
                    }
                    &buf
                }
            };
            let dst = out.col_as_slice_mut(j);
            for i in 0..self.nrows {
                let r = self.row_ptr[i]..self.row_ptr[i + 1];
                let mut s = 0.0;
                for k in r {
                    s += self.vals[k] * col[self.col_idx[k]];
                }
                dst[i] = s;
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        SparseMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut d = Mat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn scaled(&self, a: f64) -> SparseMatrix {
        let mut s = self.clone();
        s.vals.iter_mut().for_each(|v| *v *= a);
        s
    }

    /// `Σ c_k A_k`. Uses a fast path when every term shares one sparsity pattern.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> SparseMatrix {
        assert!(!terms.is_empty());
        let first = terms[0].1;
        let same_pattern = terms.iter().all(|(_, a)| {
            a.nrows == first.nrows && a.ncols == first.ncols && a.row_ptr == first.row_ptr && a.col_idx == first.col_idx
        });
        if same_pattern {
            let mut out = first.clone();
            out.vals.iter_mut().for_each(|v| *v = 0.0);
            for (c, a) in terms {
                for (o, v) in out.vals.iter_mut().zip(&a.vals) {
                    *o += c * v;
                }
            }
            return out;
        }
        let t: Vec<_> = terms
            .iter()
            .flat_map(|(c, a)| a.iter().map(move |(i, j, v)| (i, j, c * v)))
            .collect();
        SparseMatrix::from_triplets(first.nrows, first.ncols, &t)
    }

    /// Sparse product `A B`.
    pub fn mul_sparse(&self, b: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, b.nrows);
        let mut t = Vec::new();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = b.row(k);
                for (&j, &bv) in cb.iter().zip(vb) {
                    t.push((i, j, a * bv));
                }
            }
        }
        SparseMatrix::from_triplets(self.nrows, b.ncols, &t)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.iter().all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.iter().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// Quadratic form `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 2), 4.0);
        assert_eq!(a.row(0).0, &[0, 2]);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 2, 5.0), (2, 0, 0.5)]);
        let x = Mat::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.0);
        let dense = a.to_dense();
        assert!((a.mul_dense(x.as_ref()) - &dense * &x).norm_l2() < 1e-14);
        assert!((a.mul_dense(x.transpose().transpose()) - &dense * &x).norm_l2() < 1e-14);
        assert!((a.transpose().to_dense() - dense.transpose()).norm_l2() == 0.0);
        assert!((a.mul_sparse(&a).to_dense() - &dense * &dense).norm_l2() < 1e-14);
        assert!(!a.is_symmetric(1e-14));
        let b = SparseMatrix::linear_combination(&[(2.0, &a), (-1.0, &SparseMatrix::identity(3))]);
        assert!((b.to_dense() - (&dense * faer::Scale(2.0) - Mat::<f64>::identity(3, 3))).norm_l2() < 1e-14);
    }
}
