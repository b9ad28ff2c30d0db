//! Sweeps over point counts, noise levels and seeds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dtwin_core::Scalar;

use crate::config::{ScenarioConfig, ValidationErrors};
use crate::pipeline::{run_scenario, RunSummary, StageError};

pub const SUMMARY_CSV: &str = "matrix_summary.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixAxes {
    pub points: Vec<usize>,
    pub sigmas: Vec<f64>,
    /// Seeds `base.seed .. base.seed + replicates`.
    pub replicates: usize,
}

#[derive(Debug)]
pub struct Cell {
    pub n_points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub dir: PathBuf,
    pub result: Result<RunSummary, String>,
}

pub fn cell_dir(out: &Path, n_points: usize, sigma: f64, seed: u64) -> PathBuf {
    out.join(format!("n{n_points}_sigma{sigma}_seed{seed}"))
}

/// Runs every cell of the sweep. Invalid cells and failed runs are recorded
/// in their row; only an empty or invalid axis list aborts the sweep.
pub fn run_matrix(
    base: &ScenarioConfig,
    axes: &MatrixAxes,
    out: &Path,
) -> Result<Vec<Cell>, ValidationErrors> {
    let mut problems = Vec::new();
    if axes.points.is_empty() {
        problems.push("matrix: no point counts given".to_string());
    }
    if axes.sigmas.is_empty() {
        problems.push("matrix: no noise levels given".to_string());
    }
    if axes.replicates == 0 {
        problems.push("matrix: replicates must be at least 1".to_string());
    }
    if !problems.is_empty() {
        return Err(ValidationErrors(problems));
    }

    let mut plan = Vec::new();
    for &n in &axes.points {
        for &sigma in &axes.sigmas {
            for r in 0..axes.replicates as u64 {
                plan.push((n, sigma, base.seed.wrapping_add(r)));
            }
        }
    }
    let cells = plan
        .into_par_iter()
        .map(|(n_points, noise_sigma, seed)| {
            let dir = cell_dir(out, n_points, noise_sigma, seed);
            let config = ScenarioConfig {
                seed,
                n_points: Some(n_points),
                noise_sigma: Some(noise_sigma),
                output_dir: Some(dir.clone()),
                ..base.clone()
            };
            let result = match config.resolve() {
                Ok(scenario) => run_scenario(&scenario).result.map_err(|e: StageError| e.to_string()),
                Err(e) => Err(e.0.join("; ")),
            };
            Cell { n_points, noise_sigma, seed, dir, result }
        })
        .collect();
    Ok(cells)
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// One row per cell and channel. Coverage is `NA` for noise-free cells, where
/// there is no observation noise to cover.
pub fn summary_csv(cells: &[Cell], out: &Path) -> String {
    let mut s = String::from(
        "n_points,noise_sigma,seed,channel,status,mean,kernel,rmse,coverage,latent_coverage,dir,error\n",
    );
    for c in cells {
        let dir = c.dir.strip_prefix(out).unwrap_or(&c.dir).display().to_string();
        match &c.result {
            Ok(summary) => {
                for ch in &summary.channels {
                    let coverage = ch.heldout_coverage.map_or("NA".to_string(), Scalar::to_text);
                    let _ = writeln!(
                        s,
                        "{},{},{},{},ok,{},{},{},{},{},{},",
                        c.n_points,
                        c.noise_sigma.to_text(),
                        c.seed,
                        ch.channel.key(),
                        summary.model.mean.key(),
                        summary.model.kernel.key(),
                        ch.rmse.to_text(),
                        coverage,
                        ch.latent_coverage.to_text(),
                        csv_field(&dir)
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(
                    s,
                    "{},{},{},,failed,,,,NA,,{},{}",
                    c.n_points,
                    c.noise_sigma.to_text(),
                    c.seed,
                    csv_field(&dir),
                    csv_field(e)
                );
            }
        }
    }
    s
}

pub fn write_summary(cells: &[Cell], out: &Path) -> std::io::Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(SUMMARY_CSV);
    fs::write(&path, summary_csv(cells, out))?;
    Ok(path)
}
