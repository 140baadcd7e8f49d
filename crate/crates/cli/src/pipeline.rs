use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use faer::Mat;
use serde::Serialize;

use sgeig::chaos::ChaosBasis;
use sgeig::iteration::{
    isi_run_observed, DiffusionEigenProblem, EigenProblem, EigenSolution, IterationRecord, Quadrature,
    StokesEigenProblem,
};
use sgeig::lowrank::{FactoredMatrix, FullMatrix, Iterate};
use sgeig::reference::{compare, mc_reference, sg_sample, SampleEigensolver, SampleSet, SampledEigenpairs};

use crate::artifacts::{self, CoefficientDump, CoefficientMeta, ComparisonTimings, Errors, Staging, Timings};
use crate::config::{Benchmark, ExperimentConfig};

/// Tolerance of the deterministic per-sample eigensolves.
const SAMPLE_TOL: f64 = 1e-10;
/// Number of mean-problem eigenvalues written for the spectrum plot.
const MEAN_SPECTRUM_LEN: usize = 8;

/// Iterate types whose coefficients can be written as factors `Y Zᵀ`.
trait Factors: Iterate {
    const MODE: &'static str;
    fn factors(&self) -> (Mat<f64>, Mat<f64>);
}

impl Factors for FactoredMatrix {
    const MODE: &'static str = "low_rank";
    fn factors(&self) -> (Mat<f64>, Mat<f64>) {
        (self.y().to_owned(), self.z().to_owned())
    }
}

impl Factors for FullMatrix {
    const MODE: &'static str = "full_rank";
    fn factors(&self) -> (Mat<f64>, Mat<f64>) {
        (self.0.clone(), Mat::identity(self.0.ncols(), self.0.ncols()))
    }
}

struct Stochastic {
    basis: ChaosBasis,
    quad: Quadrature,
    samples: SampleSet,
}

impl Stochastic {
    fn new(cfg: &ExperimentConfig, m: usize) -> Self {
        let basis = ChaosBasis::new(m, cfg.p);
        let quad = Quadrature::sparse_grid(&basis, cfg.quad_level);
        let samples = SampleSet::generate(m, cfg.n_r, cfg.seed);
        Stochastic { basis, quad, samples }
    }
}

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs `body` with the eigenproblem selected by the config.
macro_rules! with_problem {
    ($cfg:expr, $basis:expr, |$p:ident| $body:expr) => {{
        let cfg: &ExperimentConfig = $cfg;
        let kl = cfg.kl()?;
        match cfg.benchmark {
            Benchmark::Diffusion => {
                let $p = DiffusionEigenProblem::new(cfg.n_c, &kl, $basis, cfg.diffusion_options())
                    .context("assembling the diffusion problem")?;
                $body
            }
            Benchmark::Stokes => {
                let $p = StokesEigenProblem::new(cfg.n_c, &kl, $basis, cfg.stokes_options())
                    .context("assembling the Stokes problem")?;
                $body
            }
        }
    }};
}

fn progress(verbose: bool) -> impl FnMut(&IterationRecord) {
    move |r: &IterationRecord| {
        if verbose {
            eprintln!("iteration {:>3}  angle {:.3e}  ranks {:?}", r.iteration, r.angle, r.ranks);
        }
    }
}

fn mc_phase<P: SampleEigensolver>(problem: &P, st: &Stochastic, n_e: usize) -> Result<(SampledEigenpairs, f64)> {
    let t = Instant::now();
    let mc = mc_reference(problem, &st.samples, n_e, SAMPLE_TOL).context("Monte Carlo reference")?;
    Ok((mc, seconds(t)))
}

/// Solves, samples, compares and writes the artifacts of one mode into `dir`.
#[allow(clippy::too_many_arguments)]
fn solve_phase<X: Factors, P: EigenProblem>(
    problem: &P,
    st: &Stochastic,
    cfg: &ExperimentConfig,
    mc: &SampledEigenpairs,
    t_setup: f64,
    t_mc: f64,
    dir: &Path,
    verbose: bool,
) -> Result<(EigenSolution<X>, Timings)> {
    let t = Instant::now();
    let solution: EigenSolution<X> =
        isi_run_observed(problem, &st.basis, &st.quad, &cfg.iteration(), &mut progress(verbose))
            .context("inverse subspace iteration")?;
    let t_solve = seconds(t);

    let t = Instant::now();
    let refined_samples = sg_sample(&solution, &st.basis, problem, &st.samples, true);
    let t_sample = seconds(t);
    let plain_samples = sg_sample(&solution, &st.basis, problem, &st.samples, false);
    let errors = Errors {
        refined: compare(&refined_samples, mc, true)?,
        plain: compare(&plain_samples, mc, false)?,
    };
    let timings = Timings {
        mode: X::MODE.into(),
        t_setup,
        t_solve,
        t_sample,
        t_mc: Some(t_mc),
    };

    let (mean, _) = problem.mean_eigenpairs(MEAN_SPECTRUM_LEN.min(problem.dim()), 1e-12)?;
    artifacts::write_json(dir, artifacts::CONFIG, cfg)?;
    artifacts::write_history(dir, cfg.n_e, &solution.history)?;
    artifacts::write_solver_trace(dir, &solution.history)?;
    artifacts::write_json(dir, artifacts::ERRORS, &errors)?;
    artifacts::write_json(dir, artifacts::TIMINGS, &timings)?;
    artifacts::write_mean_spectrum(dir, &mean)?;
    let dump = CoefficientDump {
        factors: solution.eigvecs.iter().map(Factors::factors).collect(),
        eigenvalues: solution.eigvals.clone(),
    };
    dump.write(&dir.join(artifacts::COEFFICIENTS))?;
    let meta = CoefficientMeta {
        layout: "magic SGEIGCF1; u64 n_e, n_x, n_xi; per vector: u64 rank k, Y (n_x x k), Z (n_xi x k), \
                 eigenvalue coefficients (n_xi); little-endian, row-major"
            .into(),
        variable: "w = L^T u with the Cholesky factor L of the mass matrix".into(),
        n_e: cfg.n_e,
        n_x: problem.dim(),
        n_xi: st.basis.len(),
        ranks: dump.factors.iter().map(|(y, _)| y.ncols()).collect(),
        multi_indices: (0..st.basis.len()).map(|k| st.basis.multi_index(k).to_vec()).collect(),
        mean_eigenvalues: solution.mean_eigenvalues.clone(),
    };
    artifacts::write_json(dir, artifacts::COEFFICIENTS_META, &meta)?;
    if verbose {
        eprintln!(
            "{}: {} iterations, t_solve {:.2} s, max eps_lambda {:.2e}, max eps_u {:.2e}",
            X::MODE,
            solution.iterations(),
            t_solve,
            errors.refined.eigenvalue_errors.iter().copied().fold(0.0, f64::max),
            errors.refined.eigenvector_errors.iter().copied().fold(0.0, f64::max),
        );
    }
    Ok((solution, timings))
}

fn n_vars(cfg: &ExperimentConfig) -> Result<usize> {
    Ok(cfg.kl()?.n_terms())
}

/// Stochastic Galerkin solve with the Monte Carlo comparison.
pub fn run(cfg: &ExperimentConfig, verbose: bool) -> Result<PathBuf> {
    let staging = Staging::create(&cfg.output)?;
    let st = Stochastic::new(cfg, n_vars(cfg)?);
    let t = Instant::now();
    with_problem!(cfg, &st.basis, |problem| {
        let t_setup = seconds(t);
        let (mc, t_mc) = mc_phase(&problem, &st, cfg.n_e)?;
        if cfg.full_rank {
            solve_phase::<FullMatrix, _>(&problem, &st, cfg, &mc, t_setup, t_mc, staging.path(), verbose)?;
        } else {
            solve_phase::<FactoredMatrix, _>(&problem, &st, cfg, &mc, t_setup, t_mc, staging.path(), verbose)?;
        }
    });
    staging.commit()
}

/// Monte Carlo reference only.
pub fn mc(cfg: &ExperimentConfig, verbose: bool) -> Result<PathBuf> {
    let staging = Staging::create(&cfg.output)?;
    let st = Stochastic::new(cfg, n_vars(cfg)?);
    let t = Instant::now();
    with_problem!(cfg, &st.basis, |problem| {
        let t_setup = seconds(t);
        let (mc, t_mc) = mc_phase(&problem, &st, cfg.n_e)?;
        if verbose {
            eprintln!("{} samples in {t_mc:.2} s", st.samples.len());
        }
        artifacts::write_json(staging.path(), artifacts::CONFIG, cfg)?;
        artifacts::write_mc_eigenvalues(staging.path(), &mc.values)?;
        artifacts::write_json(
            staging.path(),
            artifacts::TIMINGS,
            &Timings {
                mode: "mc".into(),
                t_setup,
                t_solve: 0.0,
                t_sample: 0.0,
                t_mc: Some(t_mc),
            },
        )?;
    });
    staging.commit()
}

#[derive(Debug, Serialize)]
struct Comparison {
    /// `max_s ‖λ_low − λ_full‖∞ / |λ_full[0]|` over the eigenvalue coefficients.
    max_eigenvalue_difference: f64,
    low_rank_iterations: usize,
    full_rank_iterations: usize,
}

/// Low-rank and full-rank runs against one shared Monte Carlo reference.
pub fn compare_modes(cfg: &ExperimentConfig, verbose: bool) -> Result<PathBuf> {
    let staging = Staging::create(&cfg.output)?;
    let st = Stochastic::new(cfg, n_vars(cfg)?);
    let low_cfg = ExperimentConfig {
        full_rank: false,
        ..cfg.clone()
    };
    let full_cfg = ExperimentConfig {
        full_rank: true,
        ..cfg.clone()
    };
    let low_dir = staging.path().join("low_rank");
    let full_dir = staging.path().join("full_rank");
    std::fs::create_dir_all(&low_dir)?;
    std::fs::create_dir_all(&full_dir)?;

    let t = Instant::now();
    let (low, low_t, mc, t_mc) = with_problem!(&low_cfg, &st.basis, |problem| {
        let t_setup = seconds(t);
        let (mc, t_mc) = mc_phase(&problem, &st, cfg.n_e)?;
        let (sol, timings) =
            solve_phase::<FactoredMatrix, _>(&problem, &st, &low_cfg, &mc, t_setup, t_mc, &low_dir, verbose)?;
        (sol, timings, mc, t_mc)
    });
    let t = Instant::now();
    let (full, full_t) = with_problem!(&full_cfg, &st.basis, |problem| {
        solve_phase::<FullMatrix, _>(&problem, &st, &full_cfg, &mc, seconds(t), t_mc, &full_dir, verbose)?
    });

    let max_eigenvalue_difference = low
        .eigvals
        .iter()
        .zip(&full.eigvals)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / b[0].abs())
        .fold(0.0, f64::max);
    artifacts::write_json(staging.path(), artifacts::CONFIG, cfg)?;
    artifacts::write_json(
        staging.path(),
        artifacts::TIMINGS,
        &ComparisonTimings {
            low_rank: low_t,
            full_rank: full_t,
            t_mc,
        },
    )?;
    artifacts::write_json(
        staging.path(),
        artifacts::COMPARISON,
        &Comparison {
            max_eigenvalue_difference,
            low_rank_iterations: low.iterations(),
            full_rank_iterations: full.iterations(),
        },
    )?;
    staging.commit()
}
