use anyhow::Result;
use faer::linalg::solvers::Solve;
use faer::Mat;
use sgeig::chaos::ChaosBasis;
use sgeig::discretize::{Discretization, EnvelopeCholesky, Hierarchy, StokesProblem};
use sgeig::lowrank::{FactoredMatrix, Iterate, OperatorStack, TruncationSpec};
use sgeig::randfield::{KlExpansion, KlTruncation};
use sgeig::solvers::*;

fn diffusion_mg(n_c: usize, m: usize, p: usize) -> Result<(LowRankMultigrid, usize, usize)> {
    let kl = KlExpansion::new(4.0, 0.05, KlTruncation::Fixed(m.max(1)))?;
    let mut h = Hierarchy::build(Discretization::Diffusion, n_c, 1, &kl)?;
    for level in &mut h.levels {
        level.stiffness.truncate(m + 1);
    }
    let g = ChaosBasis::new(m, p).galerkin_matrices();
    let (nx, nxi) = (h.finest().stiffness[0].nrows(), g[0].nrows());
    Ok((LowRankMultigrid::new(&h, &g, MultigridConfig::default())?, nx, nxi))
}

fn planted(nx: usize, nxi: usize, k: usize) -> FactoredMatrix {
    FactoredMatrix::new(
        Mat::from_fn(nx, k, |i, j| ((i + 1) as f64 * (0.3 + j as f64)).sin()),
        Mat::from_fn(nxi, k, |q, j| if q == j { 1.0 } else { 0.2 / (1.0 + (q + j) as f64) }),
    )
}

fn rel_err(x: &FactoredMatrix, exact: &FactoredMatrix) -> f64 {
    x.sub(exact).norm() / exact.norm()
}

struct Saddle {
    op: SaddleOperator,
    n_u: usize,
    n_p: usize,
    n_xi: usize,
}

fn saddle(n_c: usize, m: usize, p: usize, multigrid: bool) -> Result<Saddle> {
    let kl = KlExpansion::new(4.0, 0.05, KlTruncation::Fixed(m.max(1)))?;
    let mut prob = StokesProblem::assemble(n_c, &kl)?;
    prob.stiffness.truncate(m + 1);
    let g = ChaosBasis::new(m, p).galerkin_matrices();
    let n_xi = g[0].nrows();
    let velocity_precond: Box<dyn SpatialPreconditioner> = if multigrid {
        let h = Hierarchy::build(Discretization::StokesVelocity, n_c, 1, &kl)?;
        Box::new(GeometricMultigrid::new(&h, 1, 1.0)?)
    } else {
        Box::new(EnvelopeCholesky::factor(&prob.stiffness[0])?)
    };
    let op = SaddleOperator::new(
        OperatorStack::from_parts(&g, &prob.stiffness),
        prob.divergence.clone(),
        velocity_precond,
        Box::new(DiagonalPreconditioner::inverse_of(&prob.pressure_mass)),
    );
    Ok(Saddle { n_u: prob.n_u(), n_p: prob.n_p(), n_xi, op })
}

fn planted_block(s: &Saddle, k: usize) -> BlockIterate<FactoredMatrix> {
    BlockIterate {
        u: planted(s.n_u, s.n_xi, k),
        p: FactoredMatrix::zeros(s.n_p, s.n_xi),
    }
}

#[test]
fn multigrid_recovers_planted_rank_two_solution() -> Result<()> {
    let (mg, nx, nxi) = diffusion_mg(4, 3, 2)?;
    let exact = planted(nx, nxi, 2);
    let f = exact.apply(mg.operator());
    let tol = 1e-8;
    let tols = MultigridTolerances { tol, eps_abs: 1e-2 * tol, eps_rel: 1e-2 };
    let (x, stats) = mg.solve(&f, &tols)?;
    assert!(rel_err(&x, &exact) <= 10.0 * tol, "{}", rel_err(&x, &exact));
    // residuals contract from cycle to cycle, up to truncation noise
    assert!(stats.residuals.windows(2).all(|w| w[1] <= 1.01 * w[0]), "{:?}", stats.residuals);
    Ok(())
}

#[test]
fn multigrid_without_random_terms_is_deterministic_multigrid() -> Result<()> {
    let (mg, nx, nxi) = diffusion_mg(4, 0, 2)?;
    assert_eq!(nxi, 1);
    let f = FactoredMatrix::new(Mat::from_fn(nx, 1, |i, _| 1.0 + (i as f64).cos()), Mat::from_fn(1, 1, |_, _| 1.0));
    let tol = 1e-10;
    let (x, _) = mg.solve(&f, &MultigridTolerances { tol, eps_abs: 0.0, eps_rel: 0.0 })?;
    let k0 = &mg.operator().terms()[0].a;
    let direct = EnvelopeCholesky::factor(k0)?.solve(f.to_dense().as_ref());
    let err = (x.to_dense() - &direct).norm_l2() / direct.norm_l2();
    assert!(err <= 10.0 * tol, "{err}");
    Ok(())
}

#[test]
fn cg_with_identity_operator_stops_after_one_step() -> Result<()> {
    let n = 7;
    let id = sgeig::lowrank::SparseMatrix::diagonal_matrix(&vec![1.0; n]);
    let g0 = sgeig::lowrank::SparseMatrix::diagonal_matrix(&[1.0, 1.0, 1.0]);
    let ops = OperatorStack::from_parts(&[g0], &[id]);
    let f = planted(n, 3, 2);
    let (x, stats) = pcg(&ops, &IdentityPreconditioner(n), &f, 1e-12, &TruncationSpec::exact(), &CgConfig::default())?;
    assert_eq!(stats.iterations, 1);
    assert!(rel_err(&x, &f) < 1e-14);
    Ok(())
}

#[test]
fn cg_recovers_planted_solution_and_agrees_with_multigrid() -> Result<()> {
    let (mg, nx, nxi) = diffusion_mg(3, 3, 2)?;
    let ops = mg.operator();
    let exact = planted(nx, nxi, 2);
    let f = exact.apply(ops);
    let k0 = EnvelopeCholesky::factor(&ops.terms()[0].a)?;
    let (x, _) = pcg(ops, &k0, &f, 1e-8, &TruncationSpec::relative(1e-10), &CgConfig::default())?;
    assert!(rel_err(&x, &exact) <= 1e-7, "{}", rel_err(&x, &exact));

    let (y, _) = mg.solve(&f, &MultigridTolerances { tol: 1e-8, eps_abs: 1e-10, eps_rel: 1e-2 })?;
    assert!(rel_err(&x, &y) <= 10.0 * 1e-8, "{}", rel_err(&x, &y));
    Ok(())
}

#[test]
fn deterministic_saddle_system_matches_direct_solve() -> Result<()> {
    let s = saddle(3, 0, 1, false)?;
    let f = BlockIterate {
        u: FactoredMatrix::new(Mat::from_fn(s.n_u, 1, |i, _| ((i as f64) * 0.7).sin()), Mat::from_fn(1, 1, |_, _| 1.0)),
        p: FactoredMatrix::zeros(s.n_p, 1),
    };
    let tol = 1e-10;
    let (x, stats) = s.op.minres(&f, tol, &TruncationSpec::exact(), &MinresConfig::default())?;

    // block elimination: S p = B K⁻¹ f, then u = K⁻¹ (f - Bᵀ p)
    let k = &s.op.velocity.terms()[0].a;
    let chol = EnvelopeCholesky::factor(k)?;
    let schur = eigs::schur_complement(k, &s.op.divergence)?;
    let kf = chol.solve(f.u.to_dense().as_ref());
    let pressure = schur.llt(faer::Side::Lower).map_err(|e| anyhow::anyhow!("{e:?}"))?.solve(s.op.divergence.mul_dense(kf.as_ref()));
    let bt_p = s.op.divergence.transpose().mul_dense(pressure.as_ref());
    let direct = chol.solve((f.u.to_dense() - bt_p).as_ref());
    let u = x.u.to_dense();
    let err = (u - &direct).norm_l2() / direct.norm_l2();
    assert!(err <= 10.0 * tol, "{err}");
    assert!(stats.true_residual.unwrap() <= 10.0 * tol);
    Ok(())
}

#[test]
fn minres_recovers_planted_velocity() -> Result<()> {
    let s = saddle(3, 3, 2, false)?;
    let exact = planted_block(&s, 2);
    let f = s.op.apply(&exact);
    let tol = 1e-8;
    let (x, stats) = s.op.minres(&f, tol, &TruncationSpec::relative(1e-2 * tol), &MinresConfig::default())?;
    assert!(rel_err(&x.u, &exact.u) <= 10.0 * tol, "{}", rel_err(&x.u, &exact.u));
    // recurrence estimate and true residual agree to a factor of ten
    let (est, truth) = (stats.final_residual(), stats.true_residual.unwrap());
    assert!(truth <= 10.0 * est.max(1e-15) && est <= 10.0 * truth.max(1e-15), "{est} vs {truth}");
    Ok(())
}

#[test]
fn tighter_truncation_allows_smaller_minres_residual() -> Result<()> {
    let s = saddle(3, 3, 2, false)?;
    let f = s.op.apply(&planted_block(&s, 2));
    // the recurrence estimate ignores truncation, so iterate until it is tiny
    // and compare the true residuals that remain
    let run = |eps: f64| -> Result<f64> {
        let (_, st) = s.op.minres(&f, 1e-12, &TruncationSpec::relative(eps), &MinresConfig::default())?;
        Ok(st.true_residual.unwrap())
    };
    let coarse = run(1e-4)?;
    let fine = run(5e-5)?;
    assert!(coarse > 1e-9, "truncation should limit the accuracy, got {coarse}");
    assert!(fine <= coarse * 1.01, "{fine} vs {coarse}");
    Ok(())
}

#[test]
fn exact_mean_preconditioner_needs_fewer_iterations_than_a_v_cycle() -> Result<()> {
    let exact = saddle(3, 2, 2, false)?;
    let vcycle = saddle(3, 2, 2, true)?;
    let f = exact.op.apply(&planted_block(&exact, 1));
    let tr = TruncationSpec::relative(1e-10);
    let (_, a) = exact.op.minres(&f, 1e-8, &tr, &MinresConfig::default())?;
    let (_, b) = vcycle.op.minres(&f, 1e-8, &tr, &MinresConfig::default())?;
    assert!(a.iterations < b.iterations, "{} vs {}", a.iterations, b.iterations);
    Ok(())
}

#[test]
fn pressure_preconditioner_scales_rows_by_the_inverse_mass_diagonal() -> Result<()> {
    let kl = KlExpansion::new(4.0, 0.05, KlTruncation::Fixed(1))?;
    let prob = StokesProblem::assemble(2, &kl)?;
    let d = prob.pressure_mass.diagonal();
    let pc = DiagonalPreconditioner::inverse_of(&prob.pressure_mass);
    let x = prob.pressure_mass.to_dense();
    let y = pc.apply(x.as_ref());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            assert!((y[(i, j)] - x[(i, j)] / d[i]).abs() <= 1e-15 * x[(i, j)].abs().max(1.0));
        }
    }
    Ok(())
}
