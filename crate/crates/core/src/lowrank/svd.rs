//! Singular value decomposition of the small core matrices in truncation.
//!
//! The default path calls the divide-and-conquer SVD from `faer`. A one-sided
//! Jacobi SVD is kept as the fallback when that does not converge. In it, tall
//! inputs are first reduced by QR and the sweeps run on `Rᵀ`.

use faer::{Mat, MatRef};

use crate::dense::{dot, thin_qr};

const MAX_SWEEPS: usize = 60;

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn svd(a: MatRef<'_, f64>) -> Svd {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return jacobi_svd(a);
    }
    match a.thin_svd() {
        Ok(d) if d.S().column_vector().iter().all(|s| s.is_finite()) => {
            let s = d.S();
            Svd {
                u: d.U().to_owned(),
                s: (0..k).map(|i| s[i]).collect(),
                v: d.V().to_owned(),
            }
        }
        _ => jacobi_svd(a),
    }
}

/// One-sided Jacobi SVD.
pub fn jacobi_svd(a: MatRef<'_, f64>) -> Svd {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        let t = jacobi_svd(a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    if n == 0 {
        return Svd {
            u: Mat::zeros(m, 0),
            s: Vec::new(),
            v: Mat::zeros(0, 0),
        };
    }
    if m > n {
        // A = Q R and Rᵀ = U' Σ V'ᵀ give A = (Q V') Σ U'ᵀ.
        let (q, r) = thin_qr(a);
        let inner = jacobi_square(r.transpose());
        return Svd {
            u: &q * &inner.v,
            s: inner.s,
            v: inner.u,
        };
    }
    jacobi_square(a)
}

/// One-sided Jacobi on a square matrix, orthogonalizing its columns.
fn jacobi_square(a: MatRef<'_, f64>) -> Svd {
    let n = a.ncols();
    let m = a.nrows();
    let mut w = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            w[j * m + i] = a[(i, j)];
        }
    }
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    let tol = f64::EPSILON * m as f64;
    let mut norms: Vec<f64> = (0..n).map(|j| dot(&w[j * m..(j + 1) * m], &w[j * m..(j + 1) * m])).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (head, tail) = w.split_at_mut(q * m);
                let wp = &mut head[p * m..(p + 1) * m];
                let wq = &mut tail[..m];
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(wp, wq);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;

                let (vh, vt) = v.split_at_mut(q * n);
                rotate(&mut vh[p * n..(p + 1) * n], &mut vt[..n], c, s);
            }
        }
        if !rotated {
            break;
        }
        // Refresh the running norms to stop drift from the update formula.
        for j in 0..n {
            let col = &w[j * m..(j + 1) * m];
            norms[j] = dot(col, col);
        }
    }

    let sing: Vec<f64> = (0..n).map(|j| crate::dense::norm2(&w[j * m..(j + 1) * m])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sing[j].total_cmp(&sing[i]));
    let u = Mat::from_fn(m, n, |i, k| {
        let j = order[k];
        if sing[j] > 0.0 {
            w[j * m + i] / sing[j]
        } else {
            0.0
        }
    });
    let vm = Mat::from_fn(n, n, |i, k| v[order[k] * n + i]);
    let s_max = sing[order[0]];
    let first_tiny = order
        .iter()
        .position(|&j| sing[j] <= tol * s_max)
        .unwrap_or(n);
    let mut u = u;
    complete_orthonormal(&mut u, first_tiny);
    Svd {
        u,
        s: order.iter().map(|&j| sing[j]).collect(),
        v: vm,
    }
}

/// Replaces columns `start..` of `u` by an orthonormal completion of the
/// leading columns. Singular vectors of (numerically) zero singular values
/// are not determined by the data.
fn complete_orthonormal(u: &mut Mat<f64>, start: usize) {
    let (m, n) = (u.nrows(), u.ncols());
    let mut candidate = 0;
    for j in start..n {
        loop {
            let mut c = vec![0.0; m];
            c[candidate % m] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for k in 0..j {
                    let h = dot(u.col_as_slice(k), &c);
                    crate::dense::axpy(-h, u.col_as_slice(k), &mut c);
                }
            }
            let nrm = crate::dense::norm2(&c);
            if nrm > 1e-6 {
                u.col_as_slice_mut(j).iter_mut().zip(&c).for_each(|(d, x)| *d = x / nrm);
                break;
            }
            assert!(candidate < 2 * m + n, "cannot complete orthonormal basis");
        }
    }
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let a = *xi;
        let b = *yi;
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(m: usize, n: usize, seed: u64) -> Mat<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Mat::from_fn(m, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    fn check(a: &Mat<f64>) {
        check_with(a, jacobi_svd);
        check_with(a, svd);
    }

    fn check_with(a: &Mat<f64>, svd: fn(MatRef<'_, f64>) -> Svd) {
        let d = svd(a.as_ref());
        let k = a.nrows().min(a.ncols());
        assert_eq!(d.s.len(), k);
        let sigma = Mat::from_fn(k, k, |i, j| if i == j { d.s[i] } else { 0.0 });
        let rec = &d.u * &sigma * d.v.transpose();
        assert!((&rec - a).norm_l2() <= 1e-12 * a.norm_l2().max(1.0));
        assert!((d.u.transpose() * &d.u - Mat::<f64>::identity(k, k)).norm_l2() < 1e-12);
        assert!((d.v.transpose() * &d.v - Mat::<f64>::identity(k, k)).norm_l2() < 1e-12);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));

        // agree with the library SVD
        let reference = a.thin_svd().unwrap();
        let rs = reference.S();
        for i in 0..k {
            assert!((rs[i] - d.s[i]).abs() <= 1e-12 * d.s[0].max(1.0));
        }
    }

    #[test]
    fn square_tall_and_wide() {
        check(&pseudo_random(7, 7, 1));
        check(&pseudo_random(30, 5, 2));
        check(&pseudo_random(4, 25, 3));
    }

    #[test]
    fn rank_deficient_input() {
        let b = pseudo_random(20, 3, 4);
        let c = pseudo_random(3, 8, 5);
        let a = &b * &c;
        let d = jacobi_svd(a.as_ref());
        assert!(d.s[3] < 1e-12 * d.s[0]);
        check(&a);
    }

    #[test]
    fn zero_matrix() {
        let d = jacobi_svd(Mat::<f64>::zeros(5, 3).as_ref());
        assert!(d.s.iter().all(|&s| s == 0.0));
    }
}
