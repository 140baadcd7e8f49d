use std::io::{self, Write};

use crate::lowrank::SparseMatrix;

/// Writes `a` in MatrixMarket coordinate format with 1-based indices.
pub fn write_matrix_market<W: Write>(mut w: W, a: &SparseMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
