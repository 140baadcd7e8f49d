use faer::{Mat, MatRef};

use crate::dense::{cholesky_lower, lower_solve_in_place, lower_transpose_solve_in_place};
use crate::error::Result;
use crate::lowrank::OperatorStack;

/// Direct solver for `Σ G_l ⊗ A_l` assembled densely and factored once.
#[derive(Debug, Clone)]
pub struct KroneckerDirect {
    l: Mat<f64>,
    nx: usize,
    nxi: usize,
}

impl KroneckerDirect {
    pub fn new(ops: &OperatorStack) -> Result<Self> {
        let k = ops.kronecker_dense();
        Ok(KroneckerDirect {
            l: cholesky_lower(k.as_ref())?,
            nx: ops.spatial_dim(),
            nxi: ops.stochastic_dim(),
        })
    }

    /// Solves for the coefficient matrix `X` given `F`, both `n_x × n_ξ`.
    pub fn solve(&self, f: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!((f.nrows(), f.ncols()), (self.nx, self.nxi));
        let mut v = Mat::from_fn(self.nx * self.nxi, 1, |p, _| f[(p % self.nx, p / self.nx)]);
        lower_solve_in_place(self.l.as_ref(), &mut v);
        lower_transpose_solve_in_place(self.l.as_ref(), &mut v);
        Mat::from_fn(self.nx, self.nxi, |i, k| v[(k * self.nx + i, 0)])
    }
}
