//! CSV tables and SVG figures for a finished sweep.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::svg::{error_curves_svg, nstar_svg};
use super::{NStar, SweepResult, TrialRecord};
use crate::allocation::write_theory_csv;
use crate::error::{Error, Result};

/// Figure dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotOptions {
    pub width: u32,
    pub height: u32,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self { width: 640, height: 480 }
    }
}

/// Paths written by [`emit_outputs`].
#[derive(Debug, Clone, Default)]
pub struct OutputFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub nstar: PathBuf,
    pub nstar_svg: PathBuf,
    pub curves_svg: PathBuf,
    pub theory: Option<PathBuf>,
    pub errors: Option<PathBuf>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}

/// Writes `results.csv`, `summary.csv`, `nstar.csv`, `nstar.svg`,
/// `error_curves.svg`, plus `theory.csv` with a theory overlay and
/// `errors.csv` when some cells failed.
pub fn emit_outputs(result: &SweepResult, dir: &Path, plot: &PlotOptions) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let files = OutputFiles {
        results: dir.join("results.csv"),
        summary: dir.join("summary.csv"),
        nstar: dir.join("nstar.csv"),
        nstar_svg: dir.join("nstar.svg"),
        curves_svg: dir.join("error_curves.svg"),
        theory: result.config.theory.map(|_| dir.join("theory.csv")),
        errors: (!result.errors.is_empty()).then(|| dir.join("errors.csv")),
    };

    let mut w = csv::Writer::from_path(&files.results).map_err(csv_err)?;
    w.write_record(["m", "n", "trial", "W_noisy_vs_mu", "W_noisy_vs_mun", "W_mun_vs_mu"])
        .map_err(csv_err)?;
    for c in &result.cells {
        for t in &c.trials {
            w.write_record([
                t.m.to_string(),
                t.n.to_string(),
                t.trial.to_string(),
                t.w_noisy_vs_mu.to_string(),
                t.w_noisy_vs_mun.to_string(),
                t.w_mun_vs_mu.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&files.summary).map_err(csv_err)?;
    w.write_record(["m", "n", "mean_W", "std_W"]).map_err(csv_err)?;
    for c in &result.cells {
        w.write_record([c.m.to_string(), c.n.to_string(), c.mean_w.to_string(), c.std_w.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;

    let with_theory = !result.theory_curve.is_empty();
    let mut w = csv::Writer::from_path(&files.nstar).map_err(csv_err)?;
    let mut header = vec!["m", "n_star", "boundary_flag"];
    if with_theory {
        header.push("theory_n");
    }
    w.write_record(&header).map_err(csv_err)?;
    for (m, s) in &result.n_star {
        let mut row = vec![m.to_string(), s.n.to_string(), s.boundary.to_string()];
        if with_theory {
            row.push(result.theory_curve.get(m).map(f64::to_string).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;

    if let (Some(path), Some(params)) = (&files.theory, &result.config.theory) {
        write_theory_csv(fs::File::create(path)?, &result.config.m_grid, params)?;
    }
    if let Some(path) = &files.errors {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["m", "n", "message"]).map_err(csv_err)?;
        for e in &result.errors {
            w.write_record([e.m.to_string(), e.n.to_string(), e.message.clone()])
                .map_err(csv_err)?;
        }
        w.flush()?;
    }

    fs::write(&files.nstar_svg, nstar_svg(result, plot))?;
    fs::write(&files.curves_svg, error_curves_svg(result, plot))?;
    Ok(files)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Per-trial records from `results.csv`.
pub fn read_results_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    read_rows(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SummaryRow {
    pub m: u64,
    pub n: usize,
    #[serde(rename = "mean_W")]
    pub mean_w: f64,
    #[serde(rename = "std_W")]
    pub std_w: f64,
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path)
}

#[derive(Deserialize)]
struct NStarRow {
    m: u64,
    n_star: usize,
    boundary_flag: bool,
}

pub fn read_nstar_csv(path: &Path) -> Result<Vec<(u64, NStar)>> {
    Ok(read_rows::<NStarRow>(path)?
        .into_iter()
        .map(|r| {
            (
                r.m,
                NStar {
                    n: r.n_star,
                    boundary: r.boundary_flag,
                },
            )
        })
        .collect())
}
