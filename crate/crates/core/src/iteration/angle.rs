use faer::Mat;
use rayon::prelude::*;

use super::Quadrature;
use crate::dense::{jacobi_eig, thin_qr};
use crate::error::{Error, Result};
use crate::lowrank::Iterate;

const CHUNK: usize = 64;

/// Expected largest principal angle between `span{u^s(ξ)}` and `span{v^s(ξ)}`,
/// computed by quadrature.
pub fn subspace_angle<X: Iterate>(now: &[X], prev: &[X], quad: &Quadrature) -> Result<f64> {
    if now.len() != prev.len() || now.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "subspace sizes {} and {} differ or are empty",
            now.len(),
            prev.len()
        )));
    }
    let chunks: Vec<usize> = (0..quad.len()).step_by(CHUNK).collect();
    let partial: Vec<f64> = chunks
        .par_iter()
        .map(|&start| {
            let len = CHUNK.min(quad.len() - start);
            let psi = quad.psi.subcols(start, len);
            let a: Vec<Mat<f64>> = now.iter().map(|u| u.sample(psi)).collect();
            let b: Vec<Mat<f64>> = prev.iter().map(|u| u.sample(psi)).collect();
            let mut sum = 0.0;
            for q in 0..len {
                let sa = Mat::from_fn(a[0].nrows(), a.len(), |i, s| a[s][(i, q)]);
                let sb = Mat::from_fn(b[0].nrows(), b.len(), |i, s| b[s][(i, q)]);
                sum += quad.weights[start + q] * largest_principal_angle(&sa, &sb)?;
            }
            Ok(sum)
        })
        .collect::<Result<_>>()?;
    Ok(partial.iter().sum())
}

/// Largest principal angle between the column spaces of `a` and `b`.
///
/// Both the cosine (smallest singular value of `Q_aᵀ Q_b`) and the sine
/// (largest singular value of `Q_b - Q_a Q_aᵀ Q_b`) are computed so the angle
/// is accurate near `0` and near `π/2`.
pub fn largest_principal_angle(a: &Mat<f64>, b: &Mat<f64>) -> Result<f64> {
    let qa = orthonormal_basis(a)?;
    let qb = orthonormal_basis(b)?;
    let c = qa.transpose() * &qb;
    let d = &qb - &qa * &c;
    let (ev_c, _) = jacobi_eig((c.transpose() * &c).as_ref());
    let (ev_d, _) = jacobi_eig((d.transpose() * &d).as_ref());
    let cos = ev_c[0].max(0.0).sqrt();
    let sin = ev_d[ev_d.len() - 1].max(0.0).sqrt();
    Ok(sin.atan2(cos))
}

fn orthonormal_basis(a: &Mat<f64>) -> Result<Mat<f64>> {
    let (q, r) = thin_qr(a.as_ref());
    let scale = (0..r.ncols()).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..r.ncols()).any(|j| r[(j, j)].abs() <= 1e-13 * scale) || scale == 0.0 {
        return Err(Error::Breakdown("rank-deficient sampled basis".into()));
    }
    Ok(q)
}
