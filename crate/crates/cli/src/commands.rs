//! The four sweep commands. Each writes `<command>.csv` with one row per cell
//! (per cell and α for `dual-at-alpha`), the certificates behind every bound
//! value, the effective config and its entry in `run.json`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use scatbound_core::alpha::alpha_loc;
use scatbound_core::designopt::{local_optimize, LocalOptRun};
use scatbound_core::dual::{
    bound_at, solve_dual, solve_dual_path, weak_duality_check, Bound, DualCertificate, DualProblem,
    PairingConvention,
};
use scatbound_core::forward::cross_section_scale;
use serde::Serialize;
use serde_json::json;

use crate::config::{AlphaMode, SweepConfig};
use crate::output::{OutputDir, CERT_DIR};
use crate::sweep::{cell_seed, cells, run_cells, Cell, CellProblem};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a sweep command produced.
#[derive(Debug, Clone)]
pub struct CommandSummary {
    pub command: &'static str,
    pub csv: PathBuf,
    pub cells: usize,
    pub rows: usize,
    pub failed_cells: usize,
}

impl CommandSummary {
    /// 0 when every cell succeeded, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed_cells == 0 {
            0
        } else {
            3
        }
    }
}

/// `σ_raw ↦ σ/λ0` in physical units.
fn per_wavelength(config: &SweepConfig, raw: f64) -> f64 {
    cross_section_scale(2.0 * PI / config.wavelength) * raw / config.wavelength
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn min_max(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let min = values.iter().copied().reduce(f64::min);
    let max = values.iter().copied().reduce(f64::max);
    (min, max)
}

fn add_note(note: &mut String, text: impl AsRef<str>) {
    if !note.is_empty() {
        note.push_str("; ");
    }
    note.push_str(text.as_ref());
}

fn fail(status: &mut &'static str, note: &mut String, err: impl std::fmt::Display) {
    *status = "failed";
    add_note(note, err.to_string());
}

/// Output of one cell: its rows and the certificates they reference.
struct CellOutput<R> {
    rows: Vec<R>,
    certs: Vec<(String, DualCertificate)>,
    failed: bool,
}

fn cert_rel(stem: &str) -> String {
    format!("{CERT_DIR}/{stem}.json")
}

/// Shared driver: runs cells, then writes certificates, CSV and metadata in cell order.
fn run_sweep<R: Serialize + Send>(
    command: &'static str,
    config: &SweepConfig,
    out: &Path,
    work: impl Fn(&Cell) -> CellOutput<R> + Sync,
) -> anyhow::Result<CommandSummary> {
    let dir = OutputDir::create(out)?;
    dir.echo_config(command, config)?;
    let cells = cells(config);
    let start = Instant::now();
    let results = run_cells(&cells, work);
    let mut rows = Vec::new();
    let mut failed_cells = 0;
    let mut seconds = Vec::with_capacity(results.len());
    for (cell_out, secs) in results {
        for (stem, cert) in &cell_out.certs {
            dir.write_certificate(stem, cert)?;
        }
        failed_cells += cell_out.failed as usize;
        rows.extend(cell_out.rows);
        seconds.push(secs);
    }
    let csv = dir.write_csv(&format!("{}.csv", command.replace('-', "_")), &rows)?;
    dir.record_run(
        command,
        json!({
            "version": VERSION,
            "profile": config.profile,
            "seed": config.seed,
            "config_hash": config.hash(),
            "convention": PairingConvention::PlusI.to_string(),
            "cross_section_scale": cross_section_scale(2.0 * PI / config.wavelength),
            "cells": cells.len(),
            "rows": rows.len(),
            "failed_cells": failed_cells,
            "threads": rayon::current_num_threads(),
            "total_seconds": start.elapsed().as_secs_f64(),
            "cell_seconds": seconds,
        }),
    )?;
    Ok(CommandSummary {
        command,
        csv,
        cells: cells.len(),
        rows: rows.len(),
        failed_cells,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub polarization: String,
    #[serde(rename = "R_over_lambda")]
    pub r_over_lambda: f64,
    pub chi0: f64,
    pub alpha_ub: Option<f64>,
    pub divergent: Option<bool>,
    pub neg_d_over_lambda: Option<f64>,
    pub localopt_best_over_lambda: Option<f64>,
    pub ratio: Option<f64>,
    pub cert_path: String,
    pub dual_iterations: Option<usize>,
    pub dual_converged: Option<bool>,
    pub localopt_failed: Option<usize>,
    pub localopt_unconverged: Option<usize>,
    pub weak_duality_samples: Option<usize>,
    pub weak_duality_feasible: Option<usize>,
    pub weak_duality_violations: Option<usize>,
    pub n_pixels: Option<usize>,
    /// `ok` or `failed`.
    pub status: &'static str,
    pub note: String,
    pub version: &'static str,
    pub config_hash: String,
}

fn localopt_for(
    problem: &CellProblem,
    config: &SweepConfig,
    seed: u64,
) -> scatbound_core::Result<LocalOptRun> {
    local_optimize(
        &problem.g,
        &problem.incident,
        problem.lower,
        problem.upper,
        config.restarts,
        seed,
    )
}

fn bound_cell(config: &SweepConfig, cell: &Cell) -> CellOutput<BoundRow> {
    let mut row = BoundRow {
        polarization: cell.polarization.to_string(),
        r_over_lambda: cell.radius / config.wavelength,
        chi0: cell.chi0,
        alpha_ub: None,
        divergent: None,
        neg_d_over_lambda: None,
        localopt_best_over_lambda: None,
        ratio: None,
        cert_path: String::new(),
        dual_iterations: None,
        dual_converged: None,
        localopt_failed: None,
        localopt_unconverged: None,
        weak_duality_samples: None,
        weak_duality_feasible: None,
        weak_duality_violations: None,
        n_pixels: None,
        status: "ok",
        note: String::new(),
        version: VERSION,
        config_hash: config.short_hash(),
    };
    let mut certs = Vec::new();
    let seed = cell_seed(config.seed, cell.index);
    let result = (|| -> scatbound_core::Result<()> {
        let problem = CellProblem::for_cell(config, cell)?;
        row.n_pixels = Some(problem.n_pixels());
        let (ub, note) = problem.alpha_ub()?;
        row.alpha_ub = Some(ub.alpha);
        row.divergent = Some(ub.divergent);
        if let Some(n) = note {
            add_note(&mut row.note, n);
        }
        let local = localopt_for(&problem, config, seed)?;
        row.localopt_best_over_lambda = Some(per_wavelength(config, local.best));
        row.localopt_failed = Some(local.failed);
        row.localopt_unconverged = Some(local.unconverged);
        if ub.divergent {
            return Ok(());
        }
        let reference = problem.reference()?;
        let dual = DualProblem::new(
            &problem.g,
            &problem.incident,
            &reference,
            problem.lower,
            problem.upper,
            ub.alpha,
        )?;
        let cert = solve_dual(&dual, &config.dual)?;
        let bound = cert.bound();
        row.neg_d_over_lambda = Some(per_wavelength(config, bound));
        if local.best > 0.0 {
            row.ratio = Some(bound / local.best);
        }
        row.dual_iterations = Some(cert.iterations);
        row.dual_converged = Some(cert.converged);
        if !cert.converged {
            add_note(
                &mut row.note,
                "dual solver hit its iteration cap; bound remains valid",
            );
        }
        let stem = format!("bound_{}", cell.stem());
        row.cert_path = cert_rel(&stem);
        certs.push((stem, cert));
        if config.weak_duality_samples > 0 {
            let report = weak_duality_check(
                &dual,
                bound,
                config.weak_duality_samples,
                &local.maps,
                seed ^ 0x77,
            )?;
            row.weak_duality_samples = Some(report.samples);
            row.weak_duality_feasible = Some(report.feasible);
            row.weak_duality_violations = Some(report.violations);
        }
        Ok(())
    })();
    if let Err(e) = &result {
        fail(&mut row.status, &mut row.note, e);
    }
    CellOutput {
        rows: vec![row],
        certs,
        failed: result.is_err(),
    }
}

/// α_ub, the dual bound at α_ub and the local-optimization baseline per cell.
pub fn cmd_bound(config: &SweepConfig, out: &Path) -> anyhow::Result<CommandSummary> {
    run_sweep("bound", config, out, |c| bound_cell(config, c))
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub polarization: String,
    #[serde(rename = "R_over_lambda")]
    pub r_over_lambda: f64,
    pub chi0: f64,
    pub alpha_ub: Option<f64>,
    pub divergent: Option<bool>,
    pub operator_norm: Option<f64>,
    pub alpha_loc: Option<f64>,
    pub alpha_loc_min: Option<f64>,
    pub alpha_loc_median: Option<f64>,
    pub alpha_loc_max: Option<f64>,
    pub restarts_finished: Option<usize>,
    pub restarts_failed: Option<usize>,
    pub n_pixels: Option<usize>,
    /// `ok` or `failed`.
    pub status: &'static str,
    pub note: String,
    pub version: &'static str,
    pub config_hash: String,
}

fn alpha_cell(config: &SweepConfig, cell: &Cell) -> CellOutput<AlphaRow> {
    let mut row = AlphaRow {
        polarization: cell.polarization.to_string(),
        r_over_lambda: cell.radius / config.wavelength,
        chi0: cell.chi0,
        alpha_ub: None,
        divergent: None,
        operator_norm: None,
        alpha_loc: None,
        alpha_loc_min: None,
        alpha_loc_median: None,
        alpha_loc_max: None,
        restarts_finished: None,
        restarts_failed: None,
        n_pixels: None,
        status: "ok",
        note: String::new(),
        version: VERSION,
        config_hash: config.short_hash(),
    };
    let seed = cell_seed(config.seed, cell.index);
    let result = (|| -> scatbound_core::Result<()> {
        let problem = CellProblem::for_cell(config, cell)?;
        row.n_pixels = Some(problem.n_pixels());
        let (ub, note) = problem.alpha_ub()?;
        row.alpha_ub = Some(ub.alpha);
        row.divergent = Some(ub.divergent);
        row.operator_norm = ub.operator_norm;
        if let Some(n) = note {
            add_note(&mut row.note, n);
        }
        let reference = problem.reference()?;
        let loc = alpha_loc(
            &problem.g,
            problem.lower,
            problem.upper,
            &problem.incident,
            &reference,
            config.restarts,
            seed,
        )?;
        let (lo, hi) = min_max(&loc.distribution);
        row.alpha_loc = Some(loc.alpha);
        row.alpha_loc_min = lo;
        row.alpha_loc_median = median(&loc.distribution);
        row.alpha_loc_max = hi;
        row.restarts_finished = Some(loc.distribution.len());
        row.restarts_failed = Some(loc.failed);
        Ok(())
    })();
    if let Err(e) = &result {
        fail(&mut row.status, &mut row.note, e);
    }
    CellOutput {
        rows: vec![row],
        certs: Vec::new(),
        failed: result.is_err(),
    }
}

/// α_ub and the α_loc restart distribution per cell.
pub fn cmd_alpha(config: &SweepConfig, out: &Path) -> anyhow::Result<CommandSummary> {
    run_sweep("alpha", config, out, |c| alpha_cell(config, c))
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalOptRow {
    pub polarization: String,
    #[serde(rename = "R_over_lambda")]
    pub r_over_lambda: f64,
    pub chi0: f64,
    pub best_over_lambda: Option<f64>,
    pub min_over_lambda: Option<f64>,
    pub median_over_lambda: Option<f64>,
    pub restarts_finished: Option<usize>,
    pub restarts_failed: Option<usize>,
    pub unconverged: Option<usize>,
    pub max_iterations: Option<usize>,
    pub n_pixels: Option<usize>,
    /// `ok` or `failed`.
    pub status: &'static str,
    pub note: String,
    pub version: &'static str,
    pub config_hash: String,
}

fn localopt_cell(config: &SweepConfig, cell: &Cell) -> CellOutput<LocalOptRow> {
    let mut row = LocalOptRow {
        polarization: cell.polarization.to_string(),
        r_over_lambda: cell.radius / config.wavelength,
        chi0: cell.chi0,
        best_over_lambda: None,
        min_over_lambda: None,
        median_over_lambda: None,
        restarts_finished: None,
        restarts_failed: None,
        unconverged: None,
        max_iterations: None,
        n_pixels: None,
        status: "ok",
        note: String::new(),
        version: VERSION,
        config_hash: config.short_hash(),
    };
    let seed = cell_seed(config.seed, cell.index);
    let result = (|| -> scatbound_core::Result<()> {
        let problem = CellProblem::for_cell(config, cell)?;
        row.n_pixels = Some(problem.n_pixels());
        let run = localopt_for(&problem, config, seed)?;
        let scaled: Vec<f64> = run
            .finals
            .iter()
            .map(|&v| per_wavelength(config, v))
            .collect();
        row.best_over_lambda = Some(per_wavelength(config, run.best));
        row.min_over_lambda = min_max(&scaled).0;
        row.median_over_lambda = median(&scaled);
        row.restarts_finished = Some(run.finals.len());
        row.restarts_failed = Some(run.failed);
        row.unconverged = Some(run.unconverged);
        row.max_iterations = run.iterations.iter().copied().max();
        if let Some(f) = run.failures.first() {
            add_note(&mut row.note, format!("restart failed: {f}"));
        }
        Ok(())
    })();
    if let Err(e) = &result {
        fail(&mut row.status, &mut row.note, e);
    }
    CellOutput {
        rows: vec![row],
        certs: Vec::new(),
        failed: result.is_err(),
    }
}

/// Multi-start local maximization of the cross-section per cell.
pub fn cmd_localopt(config: &SweepConfig, out: &Path) -> anyhow::Result<CommandSummary> {
    run_sweep("localopt", config, out, |c| localopt_cell(config, c))
}

#[derive(Debug, Clone, Serialize)]
pub struct DualRow {
    pub polarization: String,
    #[serde(rename = "R_over_lambda")]
    pub r_over_lambda: f64,
    pub chi0: f64,
    /// `list`, `ub` or `loc`.
    pub alpha_kind: &'static str,
    pub alpha: Option<f64>,
    pub neg_d_over_lambda: Option<f64>,
    /// False for α_loc: that value does not bound the unconstrained design problem.
    pub certified_bound: bool,
    pub localopt_best_over_lambda: Option<f64>,
    /// Local-opt value above −d(α); expected to happen for α_loc.
    pub localopt_exceeds: Option<bool>,
    pub dual_iterations: Option<usize>,
    pub dual_converged: Option<bool>,
    pub cert_path: String,
    pub n_pixels: Option<usize>,
    /// `ok` or `failed`.
    pub status: &'static str,
    pub note: String,
    pub version: &'static str,
    pub config_hash: String,
}

fn dual_cell(config: &SweepConfig, cell: &Cell) -> CellOutput<DualRow> {
    let (kind, alphas): (&'static str, Vec<Option<f64>>) = match &config.alpha {
        AlphaMode::List(a) => ("list", a.iter().map(|&x| Some(x)).collect()),
        AlphaMode::Ub => ("ub", vec![None]),
        AlphaMode::Loc => ("loc", vec![None]),
    };
    let mut rows: Vec<DualRow> = alphas
        .iter()
        .map(|&alpha| DualRow {
            polarization: cell.polarization.to_string(),
            r_over_lambda: cell.radius / config.wavelength,
            chi0: cell.chi0,
            alpha_kind: kind,
            alpha,
            neg_d_over_lambda: None,
            certified_bound: kind != "loc",
            localopt_best_over_lambda: None,
            localopt_exceeds: None,
            dual_iterations: None,
            dual_converged: None,
            cert_path: String::new(),
            n_pixels: None,
            status: "ok",
            note: String::new(),
            version: VERSION,
            config_hash: config.short_hash(),
        })
        .collect();
    let mut certs = Vec::new();
    let seed = cell_seed(config.seed, cell.index);
    let result = (|| -> scatbound_core::Result<()> {
        let problem = CellProblem::for_cell(config, cell)?;
        for r in rows.iter_mut() {
            r.n_pixels = Some(problem.n_pixels());
        }
        let reference = problem.reference()?;
        let base = DualProblem::new(
            &problem.g,
            &problem.incident,
            &reference,
            problem.lower,
            problem.upper,
            0.0,
        )?;
        let bounds: Vec<Bound> = match &config.alpha {
            AlphaMode::List(a) => solve_dual_path(&base, a, &config.dual)?,
            AlphaMode::Ub => {
                let (ub, note) = problem.alpha_ub()?;
                if let Some(n) = note {
                    add_note(&mut rows[0].note, n);
                }
                rows[0].alpha = Some(ub.alpha);
                vec![bound_at(&base.with_alpha(ub.alpha), &config.dual)?]
            }
            AlphaMode::Loc => {
                let loc = alpha_loc(
                    &problem.g,
                    problem.lower,
                    problem.upper,
                    &problem.incident,
                    &reference,
                    config.restarts,
                    seed,
                )?;
                rows[0].alpha = Some(loc.alpha);
                vec![bound_at(&base.with_alpha(loc.alpha), &config.dual)?]
            }
        };
        let local = match config.alpha {
            AlphaMode::List(_) => None,
            _ => Some(localopt_for(&problem, config, seed ^ 0x10ca1)?.best),
        };
        for (i, (row, bound)) in rows.iter_mut().zip(bounds).enumerate() {
            row.localopt_best_over_lambda = local.map(|v| per_wavelength(config, v));
            match bound {
                Bound::Unbounded => add_note(&mut row.note, "α is infinite; no finite bound"),
                Bound::Certified(cert) => {
                    row.neg_d_over_lambda = Some(per_wavelength(config, cert.bound()));
                    row.localopt_exceeds = local.map(|v| v > cert.bound());
                    row.dual_iterations = Some(cert.iterations);
                    row.dual_converged = Some(cert.converged);
                    let stem = match kind {
                        "list" => format!("dual_{}_a{i:02}", cell.stem()),
                        _ => format!("dual_{kind}_{}", cell.stem()),
                    };
                    row.cert_path = cert_rel(&stem);
                    certs.push((stem, *cert));
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = &result {
        for r in rows.iter_mut() {
            fail(&mut r.status, &mut r.note, e);
        }
    }
    CellOutput {
        rows,
        certs,
        failed: result.is_err(),
    }
}

/// −d(α) over the configured α grid, or at α_ub / α_loc against local optimization.
pub fn cmd_dual_at_alpha(config: &SweepConfig, out: &Path) -> anyhow::Result<CommandSummary> {
    run_sweep("dual-at-alpha", config, out, |c| dual_cell(config, c))
}
