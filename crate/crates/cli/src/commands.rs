//! The five subcommands. Each returns the documents it produced; writing
//! them out is left to [`Output::emit`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{config_hash, ExperimentConfig, NamedSpec, VERSION};
use crate::error::CliError;
use remlab::seed::replica_seed;
use remlab::sim::{box_rate_trajectory, dichotomy_diagnostic, free_energy_mc_multi};
use remlab::varsolve::{free_energy_compare, free_energy_variational};

/// CSV form of a float: 17 significant digits, `inf`/`-inf`/`nan` spelled out.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub config_hash: String,
    /// Tabular result; printed to stdout when no output directory is given.
    pub csv_name: String,
    pub csv: String,
    /// Extra JSON documents, written only with an output directory.
    pub documents: Vec<(String, String)>,
    pub threshold_violated: bool,
}

impl Output {
    fn new(command: &str, hash: String, header: &str) -> Self {
        Output {
            csv: format!("# config_hash={hash}\n{header}\n"),
            config_hash: hash,
            csv_name: format!("{command}.csv"),
            documents: Vec::new(),
            threshold_violated: false,
        }
    }

    pub fn emit(&self, out: Option<&Path>) -> Result<(), CliError> {
        match out {
            None => {
                print!("{}", self.csv);
                Ok(())
            }
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                write_file(&dir.join(&self.csv_name), &self.csv)?;
                for (name, text) in &self.documents {
                    write_file(&dir.join(name), text)?;
                }
                Ok(())
            }
        }
    }
}

/// Writes through a temporary file so a reader never sees a partial file.
fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    cfg.require_betas()?;
    let grid = cfg.grid()?;
    let hash = config_hash(&cfg.canonical("solve"));
    let mut out = Output::new("solve", hash.clone(), "model_id,beta,value,method,step,refinements,on_boundary");
    for s in &cfg.specs {
        let results: Vec<_> = cfg
            .betas
            .par_iter()
            .map(|&beta| free_energy_variational(&s.spec, beta, &grid))
            .collect::<Result<_, _>>()?;
        for (k, r) in results.iter().enumerate() {
            writeln!(
                out.csv,
                "{},{},{},{},{},{},{}",
                csv_quote(&s.id),
                num(r.beta),
                num(r.value),
                r.method.name(),
                num(r.step),
                r.refinements,
                r.on_boundary
            )
            .unwrap();
            let doc = json!({
                "config_hash": hash,
                "model_id": s.id,
                "beta": r.beta,
                "value": r.value,
                "argmax": r.argmax,
                "method": r.method.name(),
                "on_boundary": r.on_boundary,
                "grid": {"step": r.step, "refinements": r.refinements},
            });
            out.documents.push((format!("solve_{}_beta{k:04}.json", s.id), pretty(&doc)));
        }
    }
    Ok(out)
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    cfg.require_betas()?;
    cfg.require_sizes()?;
    let sim = cfg.sim()?;
    let hash = config_hash(&cfg.canonical("simulate"));
    let mut out = Output::new("simulate", hash, "model_id,N,beta,seed,log_Z_over_N");
    for s in &cfg.specs {
        for &n in &cfg.n_list {
            for est in free_energy_mc_multi(&s.spec, n, &cfg.betas, cfg.replicas, cfg.seed, &sim)? {
                for smp in &est.samples {
                    writeln!(out.csv, "{},{},{},{},{}", csv_quote(&s.id), n, num(est.beta), smp.seed, num(smp.value))
                        .unwrap();
                }
            }
        }
    }
    Ok(out)
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    cfg.require_betas()?;
    cfg.require_sizes()?;
    let (grid, sim) = (cfg.grid()?, cfg.sim()?);
    if let Some(t) = cfg.threshold {
        if !(t >= 0.0) {
            return Err(CliError::Usage(format!("--threshold must be non-negative, got {t}")));
        }
    }
    let hash = config_hash(&cfg.canonical("compare"));
    let mut out = Output::new("compare", hash, "model_id,beta,N,variational,mc_mean,mc_stderr,gap");
    for s in &cfg.specs {
        let rows = free_energy_compare(&s.spec, &cfg.betas, &cfg.n_list, cfg.replicas, cfg.seed, &grid, &sim)?;
        for r in rows {
            writeln!(
                out.csv,
                "{},{},{},{},{},{},{}",
                csv_quote(&s.id),
                num(r.beta),
                r.n_spins,
                num(r.variational),
                num(r.mc_mean),
                num(r.mc_stderr),
                num(r.gap)
            )
            .unwrap();
            if cfg.threshold.is_some_and(|t| !(r.gap.abs() <= t)) {
                out.threshold_violated = true;
            }
        }
    }
    Ok(out)
}

pub fn cmd_ldp_check(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    cfg.require_sizes()?;
    if cfg.boxes.is_empty() {
        return Err(CliError::Usage("--box is required".into()));
    }
    let sim = cfg.sim()?;
    let hash = config_hash(&cfg.canonical("ldp-check"));
    let mut out =
        Output::new("ldp-check", hash, "model_id,box,N,mass,observed_rate,log_count,regime,predicted_rate");
    for s in &cfg.specs {
        for region in &cfg.boxes {
            let traj = box_rate_trajectory(&s.spec, region, &cfg.n_list, cfg.seed, &sim)?;
            let diag = dichotomy_diagnostic(&s.spec, region, &cfg.n_list)?;
            let predicted = diag.predicted_rate.map(|r| r.to_string()).unwrap_or_default();
            for (pt, row) in traj.iter().zip(&diag.rows) {
                writeln!(
                    out.csv,
                    "{},{},{},{},{},{},{},{}",
                    csv_quote(&s.id),
                    csv_quote(&region.to_string()),
                    pt.n_spins,
                    num(pt.mass),
                    pt.log_rate,
                    num(row.log_count),
                    diag.regime.name(),
                    predicted
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Computed,
    Skipped,
    Failed,
}

impl CellStatus {
    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Computed => "computed",
            CellStatus::Skipped => "skipped",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub file: String,
    pub model_id: String,
    pub beta: f64,
    pub n_spins: u32,
    pub config_hash: String,
    pub status: CellStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub config_hash: String,
    pub cells: Vec<CellReport>,
}

impl SweepReport {
    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

struct Cell<'a> {
    spec: &'a NamedSpec,
    beta_index: usize,
    beta: f64,
    n_spins: u32,
}

impl Cell<'_> {
    fn file(&self) -> String {
        format!("{}_beta{:04}_n{}.json", self.spec.id, self.beta_index, self.n_spins)
    }

    fn canonical(&self, cfg: &ExperimentConfig) -> Value {
        json!({
            "version": VERSION,
            "spec": self.spec.canonical_doc(),
            "beta": self.beta,
            "n": self.n_spins,
            "replicas": cfg.replicas,
            "seed": cfg.seed,
            "grid_step": cfg.grid_step,
            "max_n": cfg.max_n,
        })
    }
}

fn existing_hash(path: &Path) -> Option<String> {
    let text = std::fs::read_to_string(path).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v.get("config_hash")?.as_str().map(str::to_string)
}

fn run_cell(cell: &Cell, cfg: &ExperimentConfig, hash: &str, path: &Path) -> Result<(), CliError> {
    let (grid, sim) = (cfg.grid()?, cfg.sim()?);
    let f = free_energy_variational(&cell.spec.spec, cell.beta, &grid)?;
    let est = free_energy_mc_multi(&cell.spec.spec, cell.n_spins, &[cell.beta], cfg.replicas, cfg.seed, &sim)?.remove(0);
    let samples: Vec<Value> = est.samples.iter().map(|s| json!({"seed": s.seed, "value": s.value})).collect();
    let doc = json!({
        "config_hash": hash,
        "model_id": cell.spec.id,
        "beta": cell.beta,
        "N": cell.n_spins,
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "variational": f.value,
        "method": f.method.name(),
        "mc_mean": est.mean,
        "mc_stderr": est.stderr,
        "gap": est.mean - f.value,
        "samples": samples,
    });
    write_file(path, &pretty(&doc))
}

/// Runs every (spec, beta, N) cell into `out`, skipping cells whose file
/// already carries the matching config hash. Failed cells are recorded in
/// the manifest rather than aborting the sweep.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepReport, CliError> {
    cfg.require_betas()?;
    cfg.require_sizes()?;
    cfg.grid()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut cells = Vec::new();
    for s in &cfg.specs {
        for (bi, &beta) in cfg.betas.iter().enumerate() {
            for &n in &cfg.n_list {
                cells.push(Cell { spec: s, beta_index: bi, beta, n_spins: n });
            }
        }
    }
    let reports: Vec<CellReport> = cells
        .par_iter()
        .map(|cell| {
            let hash = config_hash(&cell.canonical(cfg));
            let file = cell.file();
            let path: PathBuf = out.join(&file);
            let (status, error) = if existing_hash(&path).as_deref() == Some(hash.as_str()) {
                (CellStatus::Skipped, None)
            } else {
                match run_cell(cell, cfg, &hash, &path) {
                    Ok(()) => (CellStatus::Computed, None),
                    Err(e) => (CellStatus::Failed, Some(e.to_string())),
                }
            };
            CellReport {
                file,
                model_id: cell.spec.id.clone(),
                beta: cell.beta,
                n_spins: cell.n_spins,
                config_hash: hash,
                status,
                error,
            }
        })
        .collect();

    let sweep_hash = config_hash(&cfg.canonical("sweep"));
    let manifest = json!({
        "config_hash": sweep_hash,
        "version": VERSION,
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "replica_seeds": (0..cfg.replicas as u64).map(|r| replica_seed(cfg.seed, r)).collect::<Vec<_>>(),
        "counts": {
            "computed": reports.iter().filter(|c| c.status == CellStatus::Computed).count(),
            "skipped": reports.iter().filter(|c| c.status == CellStatus::Skipped).count(),
            "failed": reports.iter().filter(|c| c.status == CellStatus::Failed).count(),
        },
        "cells": reports.iter().map(|c| json!({
            "file": c.file,
            "model_id": c.model_id,
            "beta": c.beta,
            "N": c.n_spins,
            "config_hash": c.config_hash,
            "status": c.status.name(),
            "error": c.error,
        })).collect::<Vec<_>>(),
    });
    write_file(&out.join("manifest.json"), &pretty(&manifest))?;
    Ok(SweepReport { config_hash: sweep_hash, cells: reports })
}
