use super::Quadrature;
use crate::error::{Error, Result};
use crate::lowrank::{Iterate, TruncationSpec};

/// Projection of `v(ξ) / ‖v(ξ)‖₂` onto the chaos basis by quadrature.
///
/// Only the `Z` factor changes, so a factored input keeps its rank.
pub fn normalize<X: Iterate>(v: &X, quad: &Quadrature) -> Result<X> {
    let sq = v.sample_inner(v, quad.psi.as_ref());
    let mut w = Vec::with_capacity(sq.len());
    for (q, (&s, &eta)) in sq.iter().zip(&quad.weights).enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Breakdown(format!("degenerate iterate: zero or invalid norm at quadrature point {q}")));
        }
        w.push(eta / s.sqrt());
    }
    Ok(v.weighted_projection(quad.psi.as_ref(), &w))
}

/// Stochastic Gram-Schmidt: `u^s = v^s - Σ_{t<s} (⟨v^s,u^t⟩/⟨u^t,u^t⟩)(ξ) u^t(ξ)`,
/// each projected onto the chaos basis, followed by truncation with `post`
/// and normalization.
pub fn gram_schmidt<X: Iterate>(vs: &[X], quad: &Quadrature, post: &TruncationSpec) -> Result<Vec<X>> {
    let psi = quad.psi.as_ref();
    let mut us: Vec<X> = Vec::with_capacity(vs.len());
    for (s, v) in vs.iter().enumerate() {
        if us.is_empty() {
            us.push(normalize(v, quad)?);
            continue;
        }
        let vv = v.sample_inner(v, psi);
        let n_q = vv.len();
        // pointwise projection coefficients c_t(ξ_q) = ⟨v, u^t⟩ / ⟨u^t, u^t⟩
        let coeffs: Vec<Vec<f64>> = us
            .iter()
            .map(|u| {
                let vu = v.sample_inner(u, psi);
                let uu = u.sample_inner(u, psi);
                (0..n_q).map(|q| vu[q] / uu[q]).collect()
            })
            .collect();
        // ‖v - Σ c_t u^t‖² at every point, valid also for slightly non-orthogonal u^t
        let mut remainder = vv.clone();
        for (t, u) in us.iter().enumerate() {
            let vu = v.sample_inner(u, psi);
            for q in 0..n_q {
                remainder[q] -= 2.0 * coeffs[t][q] * vu[q];
            }
            for (t2, u2) in us.iter().enumerate() {
                let uu = u.sample_inner(u2, psi);
                for q in 0..n_q {
                    remainder[q] += coeffs[t][q] * coeffs[t2][q] * uu[q];
                }
            }
        }
        let ratio = 1.0 - 1e-12;
        if let Some(q) = (0..n_q).find(|&q| remainder[q] < (1.0 - ratio * ratio) * vv[q]) {
            return Err(Error::Breakdown(format!(
                "degenerate subspace: vector {s} is dependent on its predecessors at quadrature point {q}"
            )));
        }
        let projections: Vec<X> = us
            .iter()
            .zip(&coeffs)
            .map(|(u, c)| {
                let w: Vec<f64> = (0..n_q).map(|q| -quad.weights[q] * c[q]).collect();
                u.weighted_projection(psi, &w)
            })
            .collect();
        let mut terms = vec![(1.0, v)];
        terms.extend(projections.iter().map(|p| (1.0, p)));
        let x = X::lincomb(&terms).truncate(post);
        us.push(normalize(&x, quad)?);
    }
    Ok(us)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::ChaosBasis;
    use crate::lowrank::FactoredMatrix;
    use faer::Mat;

    fn setup() -> (ChaosBasis, Quadrature) {
        let basis = ChaosBasis::new(2, 2);
        let quad = Quadrature::sparse_grid(&basis, 4);
        (basis, quad)
    }

    fn random_field(n_x: usize, n_xi: usize, k: usize, seed: f64) -> FactoredMatrix {
        FactoredMatrix::new(
            Mat::from_fn(n_x, k, |i, j| ((i * 7 + j * 3) as f64 * 0.37 + seed).sin()),
            Mat::from_fn(n_xi, k, |i, j| if i == 0 { 1.0 + j as f64 } else { 0.1 * ((i + j) as f64 + seed).cos() }),
        )
    }

    #[test]
    fn deterministic_vector_is_scaled_to_unit_norm() {
        let (basis, quad) = setup();
        let y: Vec<f64> = (0..5).map(|i| i as f64 + 1.0).collect();
        let mut z = vec![0.0; basis.len()];
        z[0] = 3.0;
        let u = normalize(&FactoredMatrix::rank_one(&y, &z), &quad).unwrap();
        let d = u.to_dense();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..5 {
            assert!((d[(i, 0)] - y[i] / norm).abs() < 1e-12);
            for k in 1..basis.len() {
                assert!(d[(i, k)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficients_are_quadrature_sums_of_normalized_samples() {
        let (basis, quad) = setup();
        let v = random_field(7, basis.len(), 2, 0.3);
        let u = normalize(&v, &quad).unwrap();
        assert_eq!(u.rank(), v.rank());
        let samples = v.to_dense() * &quad.psi;
        let mut expected = Mat::<f64>::zeros(7, basis.len());
        for q in 0..quad.len() {
            let col = samples.col(q);
            let n = col.norm_l2();
            for k in 0..basis.len() {
                for i in 0..7 {
                    expected[(i, k)] += quad.weights[q] * col[i] / n * quad.psi[(k, q)];
                }
            }
        }
        assert!((u.to_dense() - expected).norm_l2() < 1e-12);
    }

    #[test]
    fn normalization_is_scale_invariant() {
        let (basis, quad) = setup();
        let v = random_field(6, basis.len(), 3, 1.1);
        let a = normalize(&v, &quad).unwrap().to_dense();
        let b = normalize(&v.scale(17.5), &quad).unwrap().to_dense();
        assert!((a - b).norm_l2() < 1e-12);
    }

    #[test]
    fn zero_vector_is_rejected() {
        let (basis, quad) = setup();
        assert!(normalize(&FactoredMatrix::zeros(4, basis.len()), &quad).is_err());
    }

    #[test]
    fn orthogonal_deterministic_inputs_are_kept() {
        let (basis, quad) = setup();
        let mut z = vec![0.0; basis.len()];
        z[0] = 1.0;
        let a = FactoredMatrix::rank_one(&[2.0, 0.0, 0.0], &z);
        let b = FactoredMatrix::rank_one(&[0.0, -3.0, 0.0], &z);
        let us = gram_schmidt(&[a, b], &quad, &TruncationSpec::absolute(1e-12)).unwrap();
        let d1 = us[0].to_dense();
        let d2 = us[1].to_dense();
        assert!((d1[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((d2[(1, 0)] + 1.0).abs() < 1e-12);
        assert!(d2[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn single_vector_gram_schmidt_is_normalization() {
        let (basis, quad) = setup();
        let v = random_field(5, basis.len(), 2, 0.7);
        let a = gram_schmidt(std::slice::from_ref(&v), &quad, &TruncationSpec::absolute(1e-8)).unwrap();
        let b = normalize(&v, &quad).unwrap();
        assert!((a[0].to_dense() - b.to_dense()).norm_l2() < 1e-14);
    }

    #[test]
    fn sampled_gram_matrix_is_near_identity() {
        let (basis, quad) = setup();
        let vs: Vec<_> = (0..3)
            .map(|s| {
                let e = FactoredMatrix::rank_one(
                    &(0..8).map(|i| if i == s { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
                    &(0..basis.len()).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
                );
                e.add(&random_field(8, basis.len(), 2, s as f64).scale(0.1))
            })
            .collect();
        let us = gram_schmidt(&vs, &quad, &TruncationSpec::absolute(1e-13)).unwrap();
        for s in 0..3 {
            for t in 0..3 {
                let ip = us[s].sample_inner(&us[t], quad.psi.as_ref());
                let target = if s == t { 1.0 } else { 0.0 };
                // quadrature projection of a smooth non-polynomial function
                let worst = ip.iter().map(|x| (x - target).abs()).fold(0.0, f64::max);
                assert!(worst < 1e-2, "({s},{t}) {worst}");
            }
        }
    }

    #[test]
    fn dependent_inputs_are_flagged() {
        let (basis, quad) = setup();
        let v = random_field(5, basis.len(), 1, 0.2);
        assert!(gram_schmidt(&[v.clone(), v.scale(2.0)], &quad, &TruncationSpec::exact()).is_err());
    }
}
