use faer::Mat;
use proptest::prelude::*;
use sgeig::chaos::ChaosBasis;
use sgeig::iteration::{normalize, Quadrature};
use sgeig::lowrank::{FactoredMatrix, SparseMatrix, TruncationSpec};
use sgeig::solvers::{DiagonalPreconditioner, SpatialPreconditioner};

/// A factored matrix with singular values spread over several decades.
fn factored() -> impl Strategy<Value = FactoredMatrix> {
    (2usize..14, 2usize..10, 1usize..7).prop_flat_map(|(n, m, k)| {
        (
            prop::collection::vec(-1.0f64..1.0, n * k),
            prop::collection::vec(-1.0f64..1.0, m * k),
            prop::collection::vec(-6.0f64..0.0, k),
        )
            .prop_map(move |(y, z, decades)| {
                let y = Mat::from_fn(n, k, |i, j| y[i * k + j] * 10f64.powf(decades[j]));
                let z = Mat::from_fn(m, k, |i, j| z[i * k + j]);
                FactoredMatrix::new(y, z)
            })
    })
}

fn singular_values(x: &FactoredMatrix) -> Vec<f64> {
    let d = x.to_dense();
    let mut s: Vec<f64> = d.singular_values().unwrap();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn relative_truncation_discards_at_most_the_allowed_energy(x in factored(), eps in 1e-8f64..0.5) {
        let t = x.truncate(&TruncationSpec::relative(eps));
        let err = (x.to_dense() - t.to_dense()).norm_l2();
        let norm = x.to_dense().norm_l2();
        prop_assert!(t.rank() <= x.rank());
        prop_assert!(err <= eps * norm * (1.0 + 1e-10) + 1e-14 * norm, "{} > {}", err, eps * norm);
        // the kept rank is minimal: one fewer term would violate the bound
        let s = singular_values(&x);
        if t.rank() > 0 {
            let tail: f64 = s[t.rank() - 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(tail >= eps * norm * (1.0 - 1e-10) - 1e-14 * norm);
        }
    }

    #[test]
    fn absolute_truncation_keeps_exactly_the_large_singular_values(x in factored(), log_eps in -7.0f64..0.0) {
        let eps = 10f64.powf(log_eps);
        let s = singular_values(&x);
        prop_assume!(s.iter().all(|v| (v - eps).abs() > 1e-9 * eps.max(s[0])));
        let t = x.truncate(&TruncationSpec::absolute(eps));
        let expected = s.iter().filter(|&&v| v >= eps).count();
        prop_assert_eq!(t.rank(), expected);
        let err = (x.to_dense() - t.to_dense()).norm_l2();
        let dropped: f64 = s[expected..].iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((err - dropped).abs() <= 1e-10 * s[0], "{} vs {}", err, dropped);
    }

    #[test]
    fn rank_cap_is_respected(x in factored(), cap in 1usize..4) {
        let t = x.truncate(&TruncationSpec::relative(1e-14).with_max_rank(cap));
        prop_assert!(t.rank() <= cap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalization_preserves_rank(
        y in prop::collection::vec(-1.0f64..1.0, 24),
        z in prop::collection::vec(-0.3f64..0.3, 30),
        k in 1usize..4,
    ) {
        let basis = ChaosBasis::new(2, 2);
        let quad = Quadrature::sparse_grid(&basis, 3);
        let n_xi = basis.len();
        let v = FactoredMatrix::new(
            Mat::from_fn(8, k, |i, j| y[i * 3 + j]),
            Mat::from_fn(n_xi, k, |q, j| if q == 0 { 1.0 + j as f64 } else { z[q * 5 + j] }),
        );
        let v = v.truncate(&TruncationSpec::exact());
        let u = normalize(&v, &quad).unwrap();
        prop_assert_eq!(u.rank(), v.rank());
    }

    #[test]
    fn preconditioners_act_on_one_factor(x in factored(), d in prop::collection::vec(0.5f64..2.0, 14)) {
        let n = x.nrows();
        let diag = SparseMatrix::diagonal_matrix(&d[..n]);
        let pc = DiagonalPreconditioner::inverse_of(&diag);
        let px = x.map_left(|y| pc.apply(y));
        prop_assert_eq!(px.rank(), x.rank());
        let dense = Mat::from_fn(n, x.ncols(), |i, j| x.to_dense()[(i, j)] / d[i]);
        prop_assert!((px.to_dense() - &dense).norm_l2() <= 1e-12 * dense.norm_l2().max(1e-300));
    }
}
