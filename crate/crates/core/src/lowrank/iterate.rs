use faer::{Mat, MatRef};

use super::{FactoredMatrix, OperatorStack, TruncationSpec};
use crate::dense::dot;

/// Storage for the coefficient matrix of a stochastic Galerkin vector.
///
/// The solvers are written once against this trait and run either on
/// [`FactoredMatrix`] (low-rank) or on [`FullMatrix`] (dense, where truncation
/// is a no-op).
pub trait Iterate: Clone + Send + Sync + std::fmt::Debug {
    fn zeros(nrows: usize, ncols: usize) -> Self;
    fn from_dense(d: MatRef<'_, f64>, spec: &TruncationSpec) -> Self;
    fn to_dense(&self) -> Mat<f64>;
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn rank(&self) -> usize;
    fn scale(&self, a: f64) -> Self;
    fn lincomb(terms: &[(f64, &Self)]) -> Self;
    fn inner(&self, other: &Self) -> f64;
    fn apply(&self, ops: &OperatorStack) -> Self;
    fn map_left(&self, f: impl FnOnce(MatRef<'_, f64>) -> Mat<f64>) -> Self;
    fn map_right(&self, m: MatRef<'_, f64>) -> Self;
    fn truncate(&self, spec: &TruncationSpec) -> Self;

    /// Evaluates the random vector at sample points: `X Ψ` with `Ψ: n_ξ × n_q`.
    fn sample(&self, psi: MatRef<'_, f64>) -> Mat<f64>;

    /// Pointwise inner products `x(ξ_q)ᵀ y(ξ_q)` at the sample points.
    fn sample_inner(&self, other: &Self, psi: MatRef<'_, f64>) -> Vec<f64>;

    /// `X Ψ diag(w) Ψᵀ`, the projection of a pointwise-scaled field back onto the basis.
    fn weighted_projection(&self, psi: MatRef<'_, f64>, w: &[f64]) -> Self;

    /// `Xᵀ Y` as an `n_ξ × n_ξ` matrix.
    fn cross_gram(&self, other: &Self) -> Mat<f64>;

    /// Euclidean norms of the coefficient columns `x_k`.
    fn column_norms(&self) -> Vec<f64>;

    fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    fn sub(&self, other: &Self) -> Self {
        Self::lincomb(&[(1.0, self), (-1.0, other)])
    }
}

fn scale_columns(m: &mut Mat<f64>, w: &[f64]) {
    for (j, &wj) in w.iter().enumerate() {
        m.col_as_slice_mut(j).iter_mut().for_each(|v| *v *= wj);
    }
}

impl Iterate for FactoredMatrix {
    fn zeros(nrows: usize, ncols: usize) -> Self {
        FactoredMatrix::zeros(nrows, ncols)
    }

    fn from_dense(d: MatRef<'_, f64>, spec: &TruncationSpec) -> Self {
        FactoredMatrix::from_dense(d, spec)
    }

    fn to_dense(&self) -> Mat<f64> {
        FactoredMatrix::to_dense(self)
    }

    fn nrows(&self) -> usize {
        FactoredMatrix::nrows(self)
    }

    fn ncols(&self) -> usize {
        FactoredMatrix::ncols(self)
    }

    fn rank(&self) -> usize {
        FactoredMatrix::rank(self)
    }

    fn scale(&self, a: f64) -> Self {
        FactoredMatrix::scale(self, a)
    }

    fn lincomb(terms: &[(f64, &Self)]) -> Self {
        FactoredMatrix::lincomb(terms)
    }

    fn norm(&self) -> f64 {
        FactoredMatrix::norm(self)
    }

    fn inner(&self, other: &Self) -> f64 {
        FactoredMatrix::inner(self, other)
    }

    fn apply(&self, ops: &OperatorStack) -> Self {
        FactoredMatrix::apply(self, ops)
    }

    fn map_left(&self, f: impl FnOnce(MatRef<'_, f64>) -> Mat<f64>) -> Self {
        FactoredMatrix::map_left(self, f)
    }

    fn map_right(&self, m: MatRef<'_, f64>) -> Self {
        FactoredMatrix::map_right(self, m)
    }

    fn truncate(&self, spec: &TruncationSpec) -> Self {
        FactoredMatrix::truncate(self, spec)
    }

    fn sample(&self, psi: MatRef<'_, f64>) -> Mat<f64> {
        if self.rank() == 0 {
            return Mat::zeros(self.nrows(), psi.ncols());
        }
        self.y() * (self.z().transpose() * psi)
    }

    fn sample_inner(&self, other: &Self, psi: MatRef<'_, f64>) -> Vec<f64> {
        if self.rank() == 0 || other.rank() == 0 {
            return vec![0.0; psi.ncols()];
        }
        let c1 = self.z().transpose() * psi;
        let c2 = other.z().transpose() * psi;
        let g = self.y().transpose() * other.y();
        let gc2 = &g * &c2;
        (0..psi.ncols()).map(|q| dot(c1.col_as_slice(q), gc2.col_as_slice(q))).collect()
    }

    fn weighted_projection(&self, psi: MatRef<'_, f64>, w: &[f64]) -> Self {
        let mut c = psi.transpose() * self.z();
        for j in 0..c.ncols() {
            for (q, &wq) in w.iter().enumerate() {
                c[(q, j)] *= wq;
            }
        }
        FactoredMatrix::new(self.y().to_owned(), psi * &c)
    }

    fn cross_gram(&self, other: &Self) -> Mat<f64> {
        if self.rank() == 0 || other.rank() == 0 {
            return Mat::zeros(self.ncols(), other.ncols());
        }
        let g = self.y().transpose() * other.y();
        self.z() * (&g * other.z().transpose())
    }

    fn column_norms(&self) -> Vec<f64> {
        if self.rank() == 0 {
            return vec![0.0; self.ncols()];
        }
        let g = self.y().transpose() * self.y();
        let gz = &g * self.z().transpose();
        (0..self.ncols())
            .map(|k| {
                let s: f64 = (0..self.rank()).map(|j| self.z()[(k, j)] * gz[(j, k)]).sum();
                s.max(0.0).sqrt()
            })
            .collect()
    }
}

/// Dense coefficient matrix used for full-rank stochastic Galerkin runs.
#[derive(Debug, Clone)]
pub struct FullMatrix(pub Mat<f64>);

impl Iterate for FullMatrix {
    fn zeros(nrows: usize, ncols: usize) -> Self {
        FullMatrix(Mat::zeros(nrows, ncols))
    }

    fn from_dense(d: MatRef<'_, f64>, _spec: &TruncationSpec) -> Self {
        FullMatrix(d.to_owned())
    }

    fn to_dense(&self) -> Mat<f64> {
        self.0.clone()
    }

    fn nrows(&self) -> usize {
        self.0.nrows()
    }

    fn ncols(&self) -> usize {
        self.0.ncols()
    }

    fn rank(&self) -> usize {
        self.0.nrows().min(self.0.ncols())
    }

    fn scale(&self, a: f64) -> Self {
        FullMatrix(&self.0 * faer::Scale(a))
    }

    fn lincomb(terms: &[(f64, &Self)]) -> Self {
        let mut out = Mat::zeros(terms[0].1.nrows(), terms[0].1.ncols());
        for (c, x) in terms {
            if *c != 0.0 {
                out += &x.0 * faer::Scale(*c);
            }
        }
        FullMatrix(out)
    }

    fn inner(&self, other: &Self) -> f64 {
        (0..self.0.ncols())
            .map(|j| dot(self.0.col_as_slice(j), other.0.col_as_slice(j)))
            .sum()
    }

    fn apply(&self, ops: &OperatorStack) -> Self {
        FullMatrix(ops.apply_dense(self.0.as_ref()))
    }

    fn map_left(&self, f: impl FnOnce(MatRef<'_, f64>) -> Mat<f64>) -> Self {
        FullMatrix(f(self.0.as_ref()))
    }

    fn map_right(&self, m: MatRef<'_, f64>) -> Self {
        FullMatrix(&self.0 * m)
    }

    fn truncate(&self, _spec: &TruncationSpec) -> Self {
        self.clone()
    }

    fn sample(&self, psi: MatRef<'_, f64>) -> Mat<f64> {
        &self.0 * psi
    }

    fn sample_inner(&self, other: &Self, psi: MatRef<'_, f64>) -> Vec<f64> {
        // ψ_qᵀ (Xᵀ Y) ψ_q is cheaper than sampling both fields when n_ξ < n_x
        let g = self.cross_gram(other);
        let gp = &g * psi;
        (0..psi.ncols()).map(|q| (0..psi.nrows()).map(|k| psi[(k, q)] * gp[(k, q)]).sum()).collect()
    }

    fn weighted_projection(&self, psi: MatRef<'_, f64>, w: &[f64]) -> Self {
        let mut pw = psi.to_owned();
        scale_columns(&mut pw, w);
        FullMatrix(&self.0 * (&pw * psi.transpose()))
    }

    fn cross_gram(&self, other: &Self) -> Mat<f64> {
        self.0.transpose() * &other.0
    }

    fn column_norms(&self) -> Vec<f64> {
        (0..self.0.ncols()).map(|k| crate::dense::norm2(self.0.col_as_slice(k))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_data() -> (FactoredMatrix, FactoredMatrix, Mat<f64>, Vec<f64>) {
        let a = FactoredMatrix::new(
            Mat::from_fn(6, 2, |i, j| (i as f64 + 1.0).powi(j as i32 + 1) * 0.1),
            Mat::from_fn(4, 2, |i, j| (i as f64 - j as f64).sin()),
        );
        let b = FactoredMatrix::new(
            Mat::from_fn(6, 3, |i, j| ((i * j) as f64).cos()),
            Mat::from_fn(4, 3, |i, j| 1.0 / (1 + i + j) as f64),
        );
        let psi = Mat::from_fn(4, 5, |i, q| ((i + 2 * q) as f64 * 0.3).cos());
        let w = vec![0.1, 0.3, -0.2, 0.5, 0.3];
        (a, b, psi, w)
    }

    #[test]
    fn factored_and_full_storage_agree() {
        let (a, b, psi, w) = sample_data();
        let fa = FullMatrix(a.to_dense());
        let fb = FullMatrix(b.to_dense());

        assert!((Iterate::sample(&a, psi.as_ref()) - fa.sample(psi.as_ref())).norm_l2() < 1e-13);
        let s1 = Iterate::sample_inner(&a, &b, psi.as_ref());
        let s2 = fa.sample_inner(&fb, psi.as_ref());
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-13);
        }
        let p1 = Iterate::weighted_projection(&a, psi.as_ref(), &w).to_dense();
        let p2 = fa.weighted_projection(psi.as_ref(), &w).0;
        assert!((p1 - p2).norm_l2() < 1e-13);
        assert!((Iterate::inner(&a, &b) - fa.inner(&fb)).abs() < 1e-13);
        assert!((Iterate::cross_gram(&a, &b) - fa.cross_gram(&fb)).norm_l2() < 1e-13);
        for (x, y) in Iterate::column_norms(&a).iter().zip(fa.column_norms()) {
            assert!((x - y).abs() < 1e-13);
        }
        let c1 = <FactoredMatrix as Iterate>::lincomb(&[(2.0, &a), (-0.5, &b)]).to_dense();
        let c2 = FullMatrix::lincomb(&[(2.0, &fa), (-0.5, &fb)]).0;
        assert!((c1 - c2).norm_l2() < 1e-13);
    }
}
