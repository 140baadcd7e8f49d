//! Envelope (skyline) Cholesky factorization for banded SPD matrices.

use faer::{Mat, MatRef};

use crate::dense::dot;
use crate::error::{Error, Result};
use crate::lowrank::SparseMatrix;

/// `A = L Lᵀ` with row `i` of `L` stored from its first nonzero column up to the diagonal.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors a symmetric positive definite matrix. Only the lower triangle is read.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("cholesky of a {}x{} matrix", n, a.ncols())));
        }
        let mut first = vec![0usize; n];
        for i in 0..n {
            let (cols, _) = a.row(i);
            first[i] = cols.first().copied().unwrap_or(i).min(i);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0; start[n]];
        for i in 0..n {
            let (cols, v) = a.row(i);
            for (&j, &x) in cols.iter().zip(v) {
                if j <= i {
                    vals[start[i] + j - first[i]] = x;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let s = dot(
                    &vals[start[i] + k0 - fi..start[i] + j - fi],
                    &vals[start[j] + k0 - fj..start[j] + j - fj],
                );
                let ljj = vals[start[j + 1] - 1];
                let idx = start[i] + j - fi;
                vals[idx] = (vals[idx] - s) / ljj;
            }
            let row = &vals[start[i]..start[i + 1] - 1];
            let d = vals[start[i + 1] - 1] - dot(row, row);
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i });
            }
            vals[start[i + 1] - 1] = d.sqrt();
        }
        Ok(EnvelopeCholesky { n, first, start, vals })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L`.
    pub fn profile_size(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vals[self.start[i]..self.start[i + 1]]
    }

    /// `x ← L⁻¹ x`
    pub fn forward_in_place(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let row = self.row(i);
            let fi = self.first[i];
            let s = dot(&row[..row.len() - 1], &x[fi..i]);
            x[i] = (x[i] - s) / row[row.len() - 1];
        }
    }

    /// `x ← L⁻ᵀ x`
    pub fn backward_in_place(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let fi = self.first[i];
            x[i] /= row[row.len() - 1];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..row.len() - 1]) {
                *xk -= l * xi;
            }
        }
    }

    /// `x ← A⁻¹ x`
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.forward_in_place(x);
        self.backward_in_place(x);
    }

    /// `L x`
    pub fn mul_lower(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| dot(self.row(i), &x[self.first[i]..=i]))
            .collect()
    }

    /// `Lᵀ x`
    pub fn mul_lower_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let fi = self.first[i];
            for (yk, l) in y[fi..=i].iter_mut().zip(self.row(i)) {
                *yk += l * x[i];
            }
        }
        y
    }

    fn map_columns(&self, b: MatRef<'_, f64>, f: impl Fn(&mut [f64])) -> Mat<f64> {
        assert_eq!(b.nrows(), self.n);
        let mut out = b.to_owned();
        for j in 0..out.ncols() {
            f(out.col_as_slice_mut(j));
        }
        out
    }

    pub fn solve(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.map_columns(b, |c| self.solve_in_place(c))
    }

    pub fn forward(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.map_columns(b, |c| self.forward_in_place(c))
    }

    pub fn backward(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.map_columns(b, |c| self.backward_in_place(c))
    }

    pub fn lower(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.map_columns(b, |c| {
            let y = self.mul_lower(c);
            c.copy_from_slice(&y);
        })
    }

    pub fn lower_t(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.map_columns(b, |c| {
            let y = self.mul_lower_t(c);
            c.copy_from_slice(&y);
        })
    }

    pub fn to_dense_lower(&self) -> Mat<f64> {
        let mut l = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (k, &v) in self.row(i).iter().enumerate() {
                l[(i, self.first[i] + k)] = v;
            }
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_2d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let p = i * n + j;
                t.push((p, p, 4.0));
                if i > 0 {
                    t.push((p, p - n, -1.0));
                }
                if i + 1 < n {
                    t.push((p, p + n, -1.0));
                }
                if j > 0 {
                    t.push((p, p - 1, -1.0));
                }
                if j + 1 < n {
                    t.push((p, p + 1, -1.0));
                }
            }
        }
        SparseMatrix::from_triplets(n * n, n * n, &t)
    }

    #[test]
    fn factor_reproduces_matrix_and_solves() {
        let a = laplacian_2d(6);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let l = f.to_dense_lower();
        assert!((&l * l.transpose() - a.to_dense()).norm_l2() < 1e-12);
        let b: Vec<f64> = (0..36).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let r: f64 = a.mul_vec(&x).iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum();
        assert!(r.sqrt() < 1e-12);

        let lx = f.mul_lower(&b);
        let mut back = lx.clone();
        f.forward_in_place(&mut back);
        assert!(back.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-12));
        let ltx = f.mul_lower_t(&b);
        let mut back = ltx.clone();
        f.backward_in_place(&mut back);
        assert!(back.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-12));
    }

    #[test]
    fn detects_indefinite_matrix() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::NotPositiveDefinite { pivot: 1 })));
    }
}
