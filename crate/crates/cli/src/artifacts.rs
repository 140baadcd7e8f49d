//! On-disk artifacts of a run and the staged output directory they go into.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use faer::Mat;
use serde::{Deserialize, Serialize};

use sgeig::iteration::IterationRecord;
use sgeig::reference::ErrorReport;

use crate::config::ConfigError;

pub const CONFIG: &str = "config.json";
pub const HISTORY: &str = "convergence_history.csv";
pub const ERRORS: &str = "errors.json";
pub const TIMINGS: &str = "timings.json";
pub const COEFFICIENTS: &str = "eigen_coefficients.bin";
pub const COEFFICIENTS_META: &str = "eigen_coefficients.json";
pub const MEAN_SPECTRUM: &str = "mean_spectrum.csv";
pub const SOLVER_TRACE: &str = "solver_trace.csv";
pub const MC_EIGENVALUES: &str = "mc_eigenvalues.csv";
pub const COMPARISON: &str = "comparison.json";

/// A directory that becomes visible under its final name only once
/// [`Staging::commit`] runs. An existing target is never touched, and an
/// uncommitted staging directory is removed when dropped.
pub struct Staging {
    target: PathBuf,
    partial: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn create(target: &Path) -> Result<Self> {
        if target.exists() {
            return Err(ConfigError(format!(
                "output directory {} already exists; remove it or choose another with --out",
                target.display()
            ))
            .into());
        }
        let mut partial = target.as_os_str().to_owned();
        partial.push(".partial");
        let partial = PathBuf::from(partial);
        if partial.exists() {
            eprintln!("removing leftovers of an interrupted run in {}", partial.display());
            fs::remove_dir_all(&partial).with_context(|| format!("removing {}", partial.display()))?;
        }
        fs::create_dir_all(&partial).with_context(|| format!("creating {}", partial.display()))?;
        Ok(Staging {
            target: target.to_path_buf(),
            partial,
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.partial
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        fs::rename(&self.partial, &self.target)
            .with_context(|| format!("moving {} to {}", self.partial.display(), self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.partial);
        }
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = csv::Writer::from_path(dir.join(name)).with_context(|| format!("writing {name}"))?;
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

/// A CSV file as header and rows of raw fields.
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn read(dir: &Path, name: &str) -> Result<Csv> {
        let path = dir.join(name);
        let mut reader =
            csv::Reader::from_path(&path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let header = reader.headers()?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .map(|r| Ok(r?.iter().map(str::to_owned).collect()))
            .collect::<Result<_>>()
            .with_context(|| format!("parsing {}", path.display()))?;
        Ok(Csv { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r.get(j).map_or("", String::as_str)).collect())
    }
}

fn per_vector(prefix: &str, n_e: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n_e).map(move |s| format!("{prefix}_{s}"))
}

pub fn write_history(dir: &Path, n_e: usize, history: &[IterationRecord]) -> Result<()> {
    let mut header = vec!["iteration".to_owned(), "angle".into(), "inner_tol".into()];
    header.extend(per_vector("rank", n_e));
    header.extend(per_vector("solve_rank", n_e));
    header.extend(per_vector("inner_iterations", n_e));
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|h| {
            let mut row = vec![h.iteration.to_string(), format!("{:e}", h.angle), format!("{:e}", h.inner_tol)];
            row.extend(h.ranks.iter().map(usize::to_string));
            row.extend(h.solve_ranks.iter().map(usize::to_string));
            row.extend(h.inner_iterations.iter().map(usize::to_string));
            row
        })
        .collect();
    write_csv(dir, HISTORY, &header, &rows)
}

/// One row per outer iteration and eigenvector with the inner solver data
/// and the optional residual indicator.
pub fn write_solver_trace(dir: &Path, history: &[IterationRecord]) -> Result<()> {
    let header: Vec<String> = [
        "iteration",
        "s",
        "inner_tol",
        "inner_iterations",
        "inner_residual",
        "inner_max_rank",
        "coefficient_change",
        "residual",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for h in history {
        for s in 0..h.ranks.len() {
            let opt = |v: Option<&f64>| v.map_or(String::new(), |x| format!("{x:e}"));
            rows.push(vec![
                h.iteration.to_string(),
                (s + 1).to_string(),
                format!("{:e}", h.inner_tol),
                h.inner_iterations[s].to_string(),
                opt(h.inner_residuals.get(s)),
                h.inner_max_ranks.get(s).map_or(String::new(), usize::to_string),
                opt(h.coefficient_change.get(s)),
                opt(h.residual.as_ref().and_then(|r| r.get(s))),
            ]);
        }
    }
    write_csv(dir, SOLVER_TRACE, &header, &rows)
}

pub fn write_mean_spectrum(dir: &Path, values: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), format!("{v:e}")])
        .collect();
    write_csv(dir, MEAN_SPECTRUM, &["index".into(), "eigenvalue".into()], &rows)
}

pub fn write_mc_eigenvalues(dir: &Path, values: &[Vec<f64>]) -> Result<()> {
    let n_e = values.first().map_or(0, Vec::len);
    let mut header = vec!["sample".to_owned()];
    header.extend(per_vector("lambda", n_e));
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(r, v)| std::iter::once(r.to_string()).chain(v.iter().map(|x| format!("{x:e}"))).collect())
        .collect();
    write_csv(dir, MC_EIGENVALUES, &header, &rows)
}

/// Errors against the Monte Carlo reference with and without the
/// Rayleigh-Ritz post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    pub refined: ErrorReport,
    pub plain: ErrorReport,
}

/// Wall-clock seconds of the phases of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub mode: String,
    pub t_setup: f64,
    pub t_solve: f64,
    pub t_sample: f64,
    pub t_mc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTimings {
    pub low_rank: Timings,
    pub full_rank: Timings,
    pub t_mc: f64,
}

/// gPC coefficients of the eigenvectors `Y_s Z_sᵀ` and eigenvalues of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientDump {
    pub factors: Vec<(Mat<f64>, Mat<f64>)>,
    pub eigenvalues: Vec<Vec<f64>>,
}

const MAGIC: &[u8; 8] = b"SGEIGCF1";

impl CoefficientDump {
    /// Layout, all integers `u64` and all reals `f64`, little-endian:
    /// magic `SGEIGCF1`, `n_e`, `n_x`, `n_xi`, then for every vector its rank
    /// `k`, `Y` (`n_x × k`, row-major), `Z` (`n_xi × k`, row-major) and the
    /// `n_xi` eigenvalue coefficients.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path).with_context(|| format!("writing {}", path.display()))?);
        let (n_x, n_xi) = self.factors.first().map_or((0, 0), |(y, z)| (y.nrows(), z.nrows()));
        out.write_all(MAGIC)?;
        for n in [self.factors.len(), n_x, n_xi] {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        for ((y, z), lambda) in self.factors.iter().zip(&self.eigenvalues) {
            out.write_all(&(y.ncols() as u64).to_le_bytes())?;
            for m in [y, z] {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        out.write_all(&m[(i, j)].to_le_bytes())?;
                    }
                }
            }
            for v in lambda {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    #[cfg(test)]
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        if bytes.get(..8) != Some(MAGIC.as_slice()) {
            anyhow::bail!("{} is not a coefficient dump", path.display());
        }
        let mut pos = 8;
        let read_u64 = |pos: &mut usize| -> Result<usize> {
            let b = bytes.get(*pos..*pos + 8).context("truncated coefficient dump")?;
            *pos += 8;
            Ok(u64::from_le_bytes(b.try_into()?) as usize)
        };
        let read_f64 = |pos: &mut usize| -> Result<f64> {
            let b = bytes.get(*pos..*pos + 8).context("truncated coefficient dump")?;
            *pos += 8;
            Ok(f64::from_le_bytes(b.try_into()?))
        };
        let n_e = read_u64(&mut pos)?;
        let n_x = read_u64(&mut pos)?;
        let n_xi = read_u64(&mut pos)?;
        let mut factors = Vec::with_capacity(n_e);
        let mut eigenvalues = Vec::with_capacity(n_e);
        for _ in 0..n_e {
            let k = read_u64(&mut pos)?;
            let mut read_mat = |rows: usize| -> Result<Mat<f64>> {
                let mut m = Mat::zeros(rows, k);
                for i in 0..rows {
                    for j in 0..k {
                        m[(i, j)] = read_f64(&mut pos)?;
                    }
                }
                Ok(m)
            };
            let y = read_mat(n_x)?;
            let z = read_mat(n_xi)?;
            factors.push((y, z));
            eigenvalues.push((0..n_xi).map(|_| read_f64(&mut pos)).collect::<Result<_>>()?);
        }
        if pos != bytes.len() {
            anyhow::bail!("{} has trailing bytes", path.display());
        }
        Ok(CoefficientDump { factors, eigenvalues })
    }
}

/// Self-description stored next to the binary dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientMeta {
    pub layout: String,
    pub variable: String,
    pub n_e: usize,
    pub n_x: usize,
    pub n_xi: usize,
    pub ranks: Vec<usize>,
    pub multi_indices: Vec<Vec<u8>>,
    pub mean_eigenvalues: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_dump_round_trips_exactly() {
        let dump = CoefficientDump {
            factors: vec![
                (Mat::from_fn(5, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0)), Mat::from_fn(4, 2, |i, j| -(i as f64) * 1e-300 + j as f64)),
                (Mat::from_fn(5, 1, |i, _| f64::EPSILON * i as f64), Mat::from_fn(4, 1, |_, _| std::f64::consts::PI)),
            ],
            eigenvalues: vec![vec![1.0, 2.0, 3.0, 4.0], vec![-0.5, 0.0, 1e10, f64::MIN_POSITIVE]],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        dump.write(&path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 8 + 24 + 2 * 8 + (10 + 8 + 4 + 5 + 4 + 4) * 8);
        assert_eq!(CoefficientDump::read(&path).unwrap(), dump);
    }

    #[test]
    fn staging_refuses_existing_targets_and_renames_on_commit() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        let staging = Staging::create(&target).unwrap();
        fs::write(staging.path().join("a"), "x").unwrap();
        assert!(!target.exists());
        staging.commit().unwrap();
        assert!(target.join("a").exists());
        let err = Staging::create(&target).err().unwrap();
        assert!(err.downcast_ref::<ConfigError>().is_some());

        let other = dir.path().join("other");
        let staging = Staging::create(&other).unwrap();
        let partial = staging.path().to_path_buf();
        assert!(partial.exists());
        drop(staging);
        assert!(!partial.exists() && !other.exists());
    }
}
