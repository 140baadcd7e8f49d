//! Text tables rendered from the artifacts of finished runs.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::ValueEnum;

use crate::artifacts::{self, ComparisonTimings, Csv, Errors, Timings};
use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    /// Per-iteration ranks and inner iterations of one run.
    Ranks,
    /// Errors against the Monte Carlo reference, one column per run.
    Errors,
    /// Low-rank, full-rank and Monte Carlo timings, one column per run.
    Timings,
}

/// Left-aligned first column, right-aligned data columns.
fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let widths: Vec<usize> = (0..n)
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (j, c) in cells.iter().enumerate() {
            if j == 0 {
                s.push_str(&format!("{c:<w$}", w = widths[0]));
            } else {
                s.push_str(&format!("  {c:>w$}", w = widths[j]));
            }
        }
        s.trim_end().to_owned()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (n - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

pub fn table(which: Which, dirs: &[PathBuf]) -> Result<String> {
    if dirs.is_empty() {
        return Err(ConfigError("no run directory given".into()).into());
    }
    match which {
        Which::Ranks => ranks(&dirs[0]),
        Which::Errors => errors(dirs),
        Which::Timings => timings(dirs),
    }
}

fn ranks(dir: &Path) -> Result<String> {
    // a comparison directory holds the low-rank history one level down
    let dir = if dir.join(artifacts::HISTORY).exists() {
        dir.to_path_buf()
    } else {
        dir.join("low_rank")
    };
    let csv = Csv::read(&dir, artifacts::HISTORY)?;
    let iterations = csv.column("iteration").unwrap_or_default();
    let mut header = vec!["Iteration".to_owned()];
    header.extend(iterations.iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    for (prefix, label) in [("rank", "Rank"), ("inner_iterations", "it")] {
        for s in 1.. {
            let Some(col) = csv.column(&format!("{prefix}_{s}")) else { break };
            let mut row = vec![format!("{label} s={s}")];
            row.extend(col.iter().map(|c| c.to_string()));
            rows.push(row);
        }
    }
    Ok(render(&header, &rows))
}

fn column_label(dir: &Path) -> String {
    artifacts::read_json::<ExperimentConfig>(dir, artifacts::CONFIG)
        .map(|c| format!("n_c={}", c.n_c))
        .unwrap_or_else(|_| dir.display().to_string())
}

fn errors(dirs: &[PathBuf]) -> Result<String> {
    let mut reports = Vec::new();
    for d in dirs {
        let d = if d.join(artifacts::ERRORS).exists() { d.clone() } else { d.join("low_rank") };
        reports.push((column_label(&d), artifacts::read_json::<Errors>(&d, artifacts::ERRORS)?));
    }
    let mut header = vec![String::new()];
    header.extend(reports.iter().map(|(l, _)| l.clone()));
    let n_e = reports.iter().map(|(_, r)| r.refined.eigenvalue_errors.len()).max().unwrap_or(0);
    let cell = |v: Option<&f64>| v.map_or("-".to_owned(), |x| format!("{x:.2e}"));
    let mut rows = Vec::new();
    for s in 0..n_e {
        let mut row = vec![format!("eps_lambda s={}", s + 1)];
        row.extend(reports.iter().map(|(_, r)| cell(r.refined.eigenvalue_errors.get(s))));
        rows.push(row);
    }
    for s in 0..n_e {
        let mut row = vec![format!("eps_u s={}", s + 1)];
        row.extend(reports.iter().map(|(_, r)| cell(r.refined.eigenvector_errors.get(s))));
        rows.push(row);
    }
    for s in 0..n_e {
        let mut row = vec![format!("eps_u s={} (no RR)", s + 1)];
        row.extend(reports.iter().map(|(_, r)| cell(r.plain.eigenvector_errors.get(s))));
        rows.push(row);
    }
    Ok(render(&header, &rows))
}

/// `[low-rank SG, full-rank SG, MC]` seconds of one run or comparison.
fn timing_column(dir: &Path) -> Result<[Option<f64>; 3]> {
    if let Ok(c) = artifacts::read_json::<ComparisonTimings>(dir, artifacts::TIMINGS) {
        return Ok([Some(c.low_rank.t_solve), Some(c.full_rank.t_solve), Some(c.t_mc)]);
    }
    let t: Timings = artifacts::read_json(dir, artifacts::TIMINGS)?;
    Ok(match t.mode.as_str() {
        "low_rank" => [Some(t.t_solve), None, t.t_mc],
        "full_rank" => [None, Some(t.t_solve), t.t_mc],
        _ => [None, None, t.t_mc],
    })
}

fn timings(dirs: &[PathBuf]) -> Result<String> {
    let mut header = vec!["t [s]".to_owned()];
    let mut columns = Vec::new();
    for d in dirs {
        header.push(column_label(d));
        columns.push(timing_column(d)?);
    }
    let rows = ["low-rank SG", "full-rank SG", "MC"]
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let mut row = vec![label.to_string()];
            row.extend(columns.iter().map(|c| c[i].map_or("-".to_owned(), |x| format!("{x:.2}"))));
            row
        })
        .collect::<Vec<_>>();
    Ok(render(&header, &rows))
}
