//! Low-rank factored matrices `X = Y Zᵀ` and the operations the iterative
//! solvers need on them: addition by concatenation, operator application,
//! Frobenius inner products and SVD-based rank truncation.

mod iterate;
pub mod sparse;
pub mod svd;

use faer::{Mat, MatRef};

use crate::dense::thin_qr;
pub use iterate::{FullMatrix, Iterate};
pub use sparse::SparseMatrix;

/// Rule deciding how many singular values survive a truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Keep the smallest rank whose discarded tail has Frobenius norm at most
    /// `eps` times the norm of the whole matrix.
    Relative(f64),
    /// Keep every singular value `≥ eps`.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    pub criterion: Criterion,
    pub max_rank: Option<usize>,
}

impl TruncationSpec {
    pub fn relative(eps: f64) -> Self {
        TruncationSpec {
            criterion: Criterion::Relative(eps),
            max_rank: None,
        }
    }

    pub fn absolute(eps: f64) -> Self {
        TruncationSpec {
            criterion: Criterion::Absolute(eps),
            max_rank: None,
        }
    }

    /// Removes only exactly-zero singular values.
    pub fn exact() -> Self {
        Self::absolute(0.0)
    }

    pub fn with_max_rank(mut self, k: usize) -> Self {
        self.max_rank = Some(k);
        self
    }

    /// Number of leading singular values (sorted descending) to keep.
    pub fn select_rank(&self, s: &[f64]) -> usize {
        let nonzero = s.iter().take_while(|&&x| x > 0.0).count();
        let k = match self.criterion {
            Criterion::Absolute(eps) => s[..nonzero].iter().take_while(|&&x| x >= eps).count(),
            Criterion::Relative(eps) => {
                let total: f64 = s.iter().map(|x| x * x).sum();
                let budget = eps * eps * total;
                let mut tail = 0.0;
                let mut k = nonzero;
                while k > 0 {
                    let next = tail + s[k - 1] * s[k - 1];
                    if next > budget {
                        break;
                    }
                    tail = next;
                    k -= 1;
                }
                k
            }
        };
        match self.max_rank {
            Some(cap) => k.min(cap),
            None => k,
        }
    }
}

/// One term `G ⊗ A` of a Kronecker-sum operator.
#[derive(Debug, Clone)]
pub struct OperatorTerm {
    /// Stochastic factor acting on the right (`n_ξ × n_ξ`).
    pub g: SparseMatrix,
    /// Spatial factor acting on the left (`n_x × n_x`).
    pub a: SparseMatrix,
}

/// The operator `Σ_l G_l ⊗ A_l`, acting on `X` as `Σ_l A_l X G_lᵀ`.
#[derive(Debug, Clone)]
pub struct OperatorStack {
    terms: Vec<OperatorTerm>,
}

impl OperatorStack {
    pub fn new(terms: Vec<OperatorTerm>) -> Self {
        assert!(!terms.is_empty(), "operator stack needs at least one term");
        let (nx, nxi) = (terms[0].a.nrows(), terms[0].g.nrows());
        for t in &terms {
            assert_eq!((t.a.nrows(), t.a.ncols()), (nx, nx), "spatial factors must be square and equal-sized");
            assert_eq!((t.g.nrows(), t.g.ncols()), (nxi, nxi), "stochastic factors must be square and equal-sized");
        }
        OperatorStack { terms }
    }

    /// Pairs `(G_l, A_l)` with spatial matrices and stochastic matrices given separately.
    pub fn from_parts(g: &[SparseMatrix], a: &[SparseMatrix]) -> Self {
        assert_eq!(g.len(), a.len());
        Self::new(
            g.iter()
                .zip(a)
                .map(|(g, a)| OperatorTerm { g: g.clone(), a: a.clone() })
                .collect(),
        )
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    /// The stack without its first term.
    pub fn tail(&self) -> Option<OperatorStack> {
        (self.terms.len() > 1).then(|| OperatorStack {
            terms: self.terms[1..].to_vec(),
        })
    }

    pub fn spatial_dim(&self) -> usize {
        self.terms[0].a.nrows()
    }

    pub fn stochastic_dim(&self) -> usize {
        self.terms[0].g.nrows()
    }

    /// Dense `Σ G_l ⊗ A_l` acting on column-major `vec(X)`.
    pub fn kronecker_dense(&self) -> Mat<f64> {
        let nx = self.spatial_dim();
        let nxi = self.stochastic_dim();
        let mut k = Mat::zeros(nx * nxi, nx * nxi);
        for t in &self.terms {
            for (p, q, g) in t.g.iter() {
                for (i, j, a) in t.a.iter() {
                    k[(p * nx + i, q * nx + j)] += g * a;
                }
            }
        }
        k
    }

    /// `Σ A_l X G_lᵀ` on a dense coefficient matrix.
    pub fn apply_dense(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = Mat::zeros(x.nrows(), x.ncols());
        for t in &self.terms {
            let ax = t.a.mul_dense(x);
            // (A X) Gᵀ = (G (A X)ᵀ)ᵀ
            let gaxt = t.g.mul_dense(ax.transpose());
            out += gaxt.transpose();
        }
        out
    }
}

/// A rank-`κ` matrix stored as `Y Zᵀ` with `Y: n_x × κ` and `Z: n_ξ × κ`.
#[derive(Debug, Clone)]
pub struct FactoredMatrix {
    y: Mat<f64>,
    z: Mat<f64>,
}

impl FactoredMatrix {
    pub fn new(y: Mat<f64>, z: Mat<f64>) -> Self {
        assert_eq!(y.ncols(), z.ncols(), "factor ranks differ");
        FactoredMatrix { y, z }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        FactoredMatrix {
            y: Mat::zeros(nrows, 0),
            z: Mat::zeros(ncols, 0),
        }
    }

    /// Rank-one matrix `y zᵀ`.
    pub fn rank_one(y: &[f64], z: &[f64]) -> Self {
        FactoredMatrix {
            y: Mat::from_fn(y.len(), 1, |i, _| y[i]),
            z: Mat::from_fn(z.len(), 1, |i, _| z[i]),
        }
    }

    pub fn y(&self) -> MatRef<'_, f64> {
        self.y.as_ref()
    }

    pub fn z(&self) -> MatRef<'_, f64> {
        self.z.as_ref()
    }

    pub fn into_factors(self) -> (Mat<f64>, Mat<f64>) {
        (self.y, self.z)
    }

    pub fn nrows(&self) -> usize {
        self.y.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.z.nrows()
    }

    pub fn rank(&self) -> usize {
        self.y.ncols()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        if self.rank() == 0 {
            return Mat::zeros(self.nrows(), self.ncols());
        }
        &self.y * self.z.transpose()
    }

    pub fn from_dense(d: MatRef<'_, f64>, spec: &TruncationSpec) -> Self {
        let svd = svd::svd(d);
        let k = spec.select_rank(&svd.s);
        FactoredMatrix {
            y: Mat::from_fn(d.nrows(), k, |i, j| svd.u[(i, j)] * svd.s[j]),
            z: svd.v.subcols(0, k).to_owned(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        FactoredMatrix {
            y: &self.y * faer::Scale(a),
            z: self.z.clone(),
        }
    }

    /// Exact `Σ c_i X_i` by concatenating factors. The rank is the sum of ranks.
    pub fn lincomb(terms: &[(f64, &FactoredMatrix)]) -> Self {
        assert!(!terms.is_empty());
        let (n, m) = (terms[0].1.nrows(), terms[0].1.ncols());
        let live: Vec<_> = terms.iter().filter(|(c, x)| *c != 0.0 && x.rank() > 0).collect();
        for (_, x) in terms {
            assert_eq!((x.nrows(), x.ncols()), (n, m), "shape mismatch in factored sum");
        }
        let k: usize = live.iter().map(|(_, x)| x.rank()).sum();
        let mut y = Mat::zeros(n, k);
        let mut z = Mat::zeros(m, k);
        let mut off = 0;
        for (c, x) in live {
            let r = x.rank();
            y.subcols_mut(off, r).copy_from(&x.y * faer::Scale(*c));
            z.subcols_mut(off, r).copy_from(&x.z);
            off += r;
        }
        FactoredMatrix { y, z }
    }

    pub fn add(&self, other: &FactoredMatrix) -> Self {
        Self::lincomb(&[(1.0, self), (1.0, other)])
    }

    /// Frobenius inner product `trace((Z₂ᵀ Z₁)(Y₁ᵀ Y₂))`.
    pub fn inner(&self, other: &FactoredMatrix) -> f64 {
        if self.rank() == 0 || other.rank() == 0 {
            return 0.0;
        }
        let yy = self.y.transpose() * &other.y;
        let zz = self.z.transpose() * &other.z;
        let mut s = 0.0;
        for j in 0..yy.ncols() {
            s += crate::dense::dot(yy.col_as_slice(j), zz.col_as_slice(j));
        }
        s
    }

    /// Frobenius norm `‖R_Y R_Zᵀ‖` from thin QR factors of both sides. Going
    /// through the Gram matrices would lose half the digits on differences.
    pub fn norm(&self) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let ry = self.y.qr().thin_R().to_owned();
        let rz = self.z.qr().thin_R().to_owned();
        (&ry * rz.transpose()).norm_l2()
    }

    /// `Σ_l (A_l Y)(G_l Z)ᵀ`, of rank `(#terms) · κ`.
    pub fn apply(&self, ops: &OperatorStack) -> Self {
        assert_eq!(ops.spatial_dim(), self.nrows());
        assert_eq!(ops.stochastic_dim(), self.ncols());
        let k = self.rank();
        let nt = ops.terms().len();
        let mut y = Mat::zeros(self.nrows(), k * nt);
        let mut z = Mat::zeros(self.ncols(), k * nt);
        if k == 0 {
            return FactoredMatrix { y, z };
        }
        for (l, t) in ops.terms().iter().enumerate() {
            y.subcols_mut(l * k, k).copy_from(t.a.mul_dense(self.y.as_ref()));
            z.subcols_mut(l * k, k).copy_from(t.g.mul_dense(self.z.as_ref()));
        }
        FactoredMatrix { y, z }
    }

    /// `f(Y) Zᵀ` for a linear map `f` acting on columns.
    pub fn map_left(&self, f: impl FnOnce(MatRef<'_, f64>) -> Mat<f64>) -> Self {
        let y = f(self.y.as_ref());
        assert_eq!(y.ncols(), self.rank());
        FactoredMatrix { y, z: self.z.clone() }
    }

    /// `X M = Y (Mᵀ Z)ᵀ`.
    pub fn map_right(&self, m: MatRef<'_, f64>) -> Self {
        FactoredMatrix {
            y: self.y.clone(),
            z: m.transpose() * &self.z,
        }
    }

    /// Best approximation of lower rank according to `spec`.
    pub fn truncate(&self, spec: &TruncationSpec) -> Self {
        let (n, m, k) = (self.nrows(), self.ncols(), self.rank());
        if k == 0 {
            return self.clone();
        }
        // Reduce to X = Qy C Qzᵀ with a small core C.
        let (qy, qz, core) = if k <= n.min(m) {
            let (qy, ry) = thin_qr(self.y.as_ref());
            let (qz, rz) = thin_qr(self.z.as_ref());
            (qy, qz, &ry * rz.transpose())
        } else if m <= n {
            let (qz, rz) = thin_qr(self.z.as_ref());
            let w = &self.y * rz.transpose();
            let (qy, ry) = thin_qr(w.as_ref());
            (qy, qz, ry)
        } else {
            let (qy, ry) = thin_qr(self.y.as_ref());
            let w = &self.z * ry.transpose();
            let (qz, rz) = thin_qr(w.as_ref());
            (qy, qz, rz.transpose().to_owned())
        };
        let d = svd::svd(core.as_ref());
        let r = spec.select_rank(&d.s);
        let us = Mat::from_fn(d.u.nrows(), r, |i, j| d.u[(i, j)] * d.s[j]);
        FactoredMatrix {
            y: &qy * &us,
            z: &qz * d.v.subcols(0, r),
        }
    }

    /// Singular values of `Y Zᵀ`, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.rank() == 0 {
            return Vec::new();
        }
        let t = self.truncate(&TruncationSpec::exact());
        (0..t.rank()).map(|j| crate::dense::norm2(t.y.col_as_slice(j))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        }
    }

    fn random_factored(n: usize, m: usize, k: usize, seed: u64) -> FactoredMatrix {
        let mut r = lcg(seed);
        let y = Mat::from_fn(n, k, |_, _| r());
        let z = Mat::from_fn(m, k, |_, _| r());
        FactoredMatrix::new(y, z)
    }

    #[test]
    fn select_rank_rules() {
        let s = [4.0, 2.0, 1.0, 0.5, 0.0];
        assert_eq!(TruncationSpec::absolute(1.0).select_rank(&s), 3);
        assert_eq!(TruncationSpec::absolute(0.0).select_rank(&s), 4);
        // tail energy of the last two nonzero values is 1.25 out of 21.25
        let eps = (1.25f64 / 21.25).sqrt();
        assert_eq!(TruncationSpec::relative(eps * 1.0001).select_rank(&s), 2);
        assert_eq!(TruncationSpec::relative(eps * 0.9999).select_rank(&s), 3);
        assert_eq!(TruncationSpec::relative(0.0).with_max_rank(1).select_rank(&s), 1);
    }

    #[test]
    fn truncation_matches_dense_svd_error() {
        for (n, m, k) in [(20, 9, 4), (6, 15, 8), (12, 5, 30), (40, 40, 3)] {
            let x = random_factored(n, m, k, (n * m + k) as u64);
            let dense = x.to_dense();
            let reference = dense.thin_svd().unwrap();
            let s = reference.S();
            let cut = 2.min(n.min(m));
            let spec = TruncationSpec::relative(0.0).with_max_rank(cut);
            let t = x.truncate(&spec);
            assert_eq!(t.rank(), cut);
            let err = (t.to_dense() - &dense).norm_l2();
            let best: f64 = (cut..n.min(m)).map(|i| s[i] * s[i]).sum::<f64>().sqrt();
            assert!((err - best).abs() < 1e-10 * dense.norm_l2());
        }
    }

    #[test]
    fn exact_truncation_reveals_rank() {
        let x = random_factored(10, 8, 3, 7);
        let doubled = x.add(&x.scale(2.0));
        assert_eq!(doubled.rank(), 6);
        let t = doubled.truncate(&TruncationSpec::absolute(1e-12));
        assert_eq!(t.rank(), 3);
        assert!((t.to_dense() - x.to_dense() * faer::Scale(3.0)).norm_l2() < 1e-12);
    }

    #[test]
    fn inner_product_and_apply_match_dense() {
        let a = random_factored(7, 5, 2, 11);
        let b = random_factored(7, 5, 3, 12);
        let (da, db) = (a.to_dense(), b.to_dense());
        let mut dense_inner = 0.0;
        for j in 0..5 {
            for i in 0..7 {
                dense_inner += da[(i, j)] * db[(i, j)];
            }
        }
        assert!((a.inner(&b) - dense_inner).abs() < 1e-13);

        let mut r = lcg(3);
        let g1 = SparseMatrix::from_dense(Mat::from_fn(5, 5, |_, _| r()).as_ref());
        let a1 = SparseMatrix::from_dense(Mat::from_fn(7, 7, |_, _| r()).as_ref());
        let ops = OperatorStack::from_parts(&[SparseMatrix::identity(5), g1], &[SparseMatrix::identity(7), a1]);
        let applied = a.apply(&ops).to_dense();
        assert!((applied.clone() - ops.apply_dense(da.as_ref())).norm_l2() < 1e-13);

        let kron = ops.kronecker_dense();
        let vec_x = Mat::from_fn(35, 1, |p, _| da[(p % 7, p / 7)]);
        let kx = &kron * &vec_x;
        for p in 0..35 {
            assert!((kx[(p, 0)] - applied[(p % 7, p / 7)]).abs() < 1e-13);
        }
    }

    #[test]
    fn from_dense_round_trip() {
        let x = random_factored(9, 6, 6, 5).to_dense();
        let f = FactoredMatrix::from_dense(x.as_ref(), &TruncationSpec::exact());
        assert!((f.to_dense() - &x).norm_l2() < 1e-12);
        assert_eq!(f.singular_values().len(), 6);
    }
}
