use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use sgeig::iteration::{DiffusionOptions, InnerSchedule, IterationConfig, StokesOptions};
use sgeig::randfield::{KlExpansion, KlTruncation};

/// An invalid experiment description. Reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Diffusion,
    Stokes,
}

/// Everything that defines one experiment. Missing JSON fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    /// Number of uniform refinements of the unit square.
    pub n_c: usize,
    /// Coarsest multigrid level.
    pub n_c0: usize,
    /// Correlation length of the random field.
    pub b: f64,
    pub sigma: f64,
    /// Number of KL terms. When absent, enough terms for 95% of the variance.
    pub m: Option<usize>,
    /// Total degree of the chaos basis.
    pub p: usize,
    pub n_e: usize,
    pub quad_level: usize,
    pub tol_isi: f64,
    pub max_iter: usize,
    /// Fixed inner solver tolerance. When absent the tolerance adapts to the outer angle.
    pub inner_tol: Option<f64>,
    pub post_truncation: f64,
    /// Relative truncation inside the diffusion multigrid solver.
    pub eps_rel: Option<f64>,
    /// Rank cap of the Stokes MINRES iterates.
    pub max_rank: Option<usize>,
    /// Dense coefficient matrices without any truncation.
    pub full_rank: bool,
    pub residual_diagnostics: bool,
    pub n_r: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            benchmark: Benchmark::Diffusion,
            n_c: 5,
            n_c0: 1,
            b: 5.0,
            sigma: 0.01,
            m: None,
            p: 3,
            n_e: 3,
            quad_level: 4,
            tol_isi: 1e-5,
            max_iter: 50,
            inner_tol: None,
            post_truncation: 1e-8,
            eps_rel: None,
            max_rank: None,
            full_rank: false,
            residual_diagnostics: false,
            n_r: 500,
            seed: 2024,
            output: PathBuf::from("results"),
        }
    }
}

/// Command-line flags that override single config fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub benchmark: Option<Benchmark>,
    #[arg(long)]
    pub n_c: Option<usize>,
    #[arg(long)]
    pub n_c0: Option<usize>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n_e: Option<usize>,
    #[arg(long)]
    pub quad_level: Option<usize>,
    #[arg(long)]
    pub tol_isi: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub inner_tol: Option<f64>,
    #[arg(long)]
    pub post_truncation: Option<f64>,
    #[arg(long)]
    pub eps_rel: Option<f64>,
    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(long)]
    pub full_rank: bool,
    #[arg(long)]
    pub residual_diagnostics: bool,
    #[arg(long)]
    pub n_r: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field.clone() { self.$field = v; })*
            };
        }
        set!(benchmark, n_c, n_c0, b, sigma, p, n_e, quad_level, tol_isi, max_iter, post_truncation, n_r, seed);
        if o.m.is_some() {
            self.m = o.m;
        }
        if o.inner_tol.is_some() {
            self.inner_tol = o.inner_tol;
        }
        if o.eps_rel.is_some() {
            self.eps_rel = o.eps_rel;
        }
        if o.max_rank.is_some() {
            self.max_rank = o.max_rank;
        }
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
        self.full_rank |= o.full_rank;
        self.residual_diagnostics |= o.residual_diagnostics;
    }

    pub fn validate(&self) -> Result<()> {
        let min_nc = match self.benchmark {
            Benchmark::Diffusion => 1,
            Benchmark::Stokes => 2,
        };
        if !(min_nc..=10).contains(&self.n_c) {
            return Err(invalid(format!("n_c = {} must lie in {min_nc}..=10", self.n_c)));
        }
        if self.n_c0 == 0 || self.n_c0 > self.n_c {
            return Err(invalid(format!("n_c0 = {} must lie in 1..=n_c", self.n_c0)));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(invalid("correlation length b must be positive"));
        }
        if !(self.sigma.is_finite() && (0.0..1.0).contains(&self.sigma)) {
            return Err(invalid("sigma must lie in [0, 1)"));
        }
        if self.m == Some(0) {
            return Err(invalid("m must be at least 1"));
        }
        if self.p > 10 {
            return Err(invalid("p must not exceed 10"));
        }
        if self.n_e == 0 || self.n_e > 10 {
            return Err(invalid("n_e must lie in 1..=10"));
        }
        if !(1..=8).contains(&self.quad_level) {
            return Err(invalid("quad_level must lie in 1..=8"));
        }
        let unit = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        unit("tol_isi", self.tol_isi)?;
        if let Some(t) = self.inner_tol {
            unit("inner_tol", t)?;
        }
        if let Some(t) = self.eps_rel {
            unit("eps_rel", t)?;
        }
        if !(self.post_truncation.is_finite() && self.post_truncation >= 0.0) {
            return Err(invalid("post_truncation must be non-negative"));
        }
        if self.max_iter == 0 || self.n_r == 0 {
            return Err(invalid("max_iter and n_r must be positive"));
        }
        if self.max_rank == Some(0) {
            return Err(invalid("max_rank must be positive"));
        }
        Ok(())
    }

    pub fn kl(&self) -> Result<KlExpansion> {
        let truncation = match self.m {
            Some(m) => KlTruncation::Fixed(m),
            None => KlTruncation::Energy(0.95),
        };
        KlExpansion::new(self.b, self.sigma, truncation).context("random field")
    }

    /// Outer iteration settings. Full-rank mode switches off truncation.
    pub fn iteration(&self) -> IterationConfig {
        IterationConfig {
            n_e: self.n_e,
            tol_isi: self.tol_isi,
            max_iter: self.max_iter,
            schedule: self.inner_tol.map_or(InnerSchedule::Adaptive, InnerSchedule::Fixed),
            post_truncation: if self.full_rank { 0.0 } else { self.post_truncation },
            residual_diagnostics: self.residual_diagnostics,
            ..Default::default()
        }
    }

    pub fn diffusion_options(&self) -> DiffusionOptions {
        let mut o = DiffusionOptions {
            coarsest_level: self.n_c0,
            ..Default::default()
        };
        if let Some(e) = self.eps_rel {
            o.eps_rel = e;
        }
        if self.full_rank {
            o.abs_factor = 0.0;
            o.eps_rel = 0.0;
        }
        o
    }

    pub fn stokes_options(&self) -> StokesOptions {
        let mut o = StokesOptions {
            coarsest_level: self.n_c0,
            max_rank: self.max_rank,
            ..Default::default()
        };
        if self.full_rank {
            o.rel_factor = 0.0;
            o.max_rank = None;
        }
        o
    }
}
