//! Self-check suite: series oracle, grid convergence, pairing-convention
//! calibration with weak duality, and adjoint gradients.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatbound_core::alpha::alpha_ub;
use scatbound_core::designopt::{adjoint_gradient, deviation_gradient, local_optimize};
use scatbound_core::dual::{
    calibrate_conventions, select_convention, DualOptions, DualProblem, PairingConvention,
};
use scatbound_core::forward::cross_section_scale;
use scatbound_core::{mie_cross_section, solve_vie, ContrastMap, Polarization};
use serde::Serialize;

use crate::sweep::CellProblem;

/// Relative tolerance of the disc-versus-series comparison per polarization.
pub fn series_tolerance(pol: Polarization) -> f64 {
    match pol {
        Polarization::Te => 0.02,
        Polarization::Tm => 0.03,
    }
}

pub const CONVERGENCE_RATIO: f64 = 1.5;
pub const GRADIENT_TOL: f64 = 1e-4;
pub const GRADIENT_POINTS: usize = 5;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub convention: Option<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, prefix: &str) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .collect()
    }
}

fn disc_width(
    pol: Polarization,
    radius: f64,
    spacing: f64,
    chi: f64,
) -> anyhow::Result<(f64, f64, usize)> {
    let p = CellProblem::build(1.0, spacing, pol, radius, 0.0, chi)?;
    let map = ContrastMap::uniform(p.n_pixels(), chi, 0.0, chi)?;
    let sol = solve_vie(&p.g, &map, &p.incident)?;
    let grid = p.g.grid();
    Ok((
        sol.cross_section * cross_section_scale(grid.wavenumber()),
        grid.equivalent_radius(),
        grid.n_pixels(),
    ))
}

/// Homogeneous disc 2R = 0.2λ0, χ = 1, δx = λ0/100 against the series at the
/// equal-area radius of the pixelated disc.
pub fn series_checks() -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    for pol in [Polarization::Te, Polarization::Tm] {
        let t = Instant::now();
        let (vie, eq_radius, n) = disc_width(pol, 0.1, 0.01, 1.0)?;
        let secs = t.elapsed().as_secs_f64();
        let eq = mie_cross_section(eq_radius, 1.0, 1.0, pol)?.cross_section;
        let nominal = mie_cross_section(0.1, 1.0, 1.0, pol)?.cross_section;
        let err = (vie / eq - 1.0).abs();
        out.push(Check {
            name: format!("series/{pol}"),
            passed: err <= series_tolerance(pol) && secs < 60.0,
            value: err,
            threshold: series_tolerance(pol),
            detail: format!(
                "N={n} vie={vie:.6e} series(equal-area R={eq_radius:.6})={eq:.6e} series(nominal)={nominal:.6e} solve={secs:.2}s"
            ),
        });
    }
    Ok(out)
}

/// Successive σ differences over δx ∈ {λ0/50, λ0/100, λ0/200}.
pub fn convergence_checks() -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    for pol in [Polarization::Te, Polarization::Tm] {
        let s: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dx| disc_width(pol, 0.1, dx, 1.0).map(|r| r.0))
            .collect::<anyhow::Result<_>>()?;
        let (d1, d2) = ((s[1] - s[0]).abs(), (s[2] - s[1]).abs());
        let ratio = d1 / d2;
        out.push(Check {
            name: format!("convergence/{pol}"),
            passed: ratio >= CONVERGENCE_RATIO,
            value: ratio,
            threshold: CONVERGENCE_RATIO,
            detail: format!(
                "sigma={:.6e}/{:.6e}/{:.6e} differences {d1:.3e} -> {d2:.3e}",
                s[0], s[1], s[2]
            ),
        });
    }
    Ok(out)
}

/// Runs the weak-duality suite under every pairing convention and selects one.
pub fn calibration_checks(
    samples: usize,
    seed: u64,
) -> anyhow::Result<(Vec<Check>, Option<PairingConvention>)> {
    let mut evidence = Vec::new();
    let mut out = Vec::new();
    for pol in [Polarization::Te, Polarization::Tm] {
        let (lo, hi) = (0.0, 0.5);
        let p = CellProblem::build(1.0, 0.01, pol, 0.025, lo, hi)?;
        let reference = p.reference()?;
        let ub = alpha_ub(&p.g, lo, hi)?;
        let local = local_optimize(&p.g, &p.incident, lo, hi, 4, seed)?;
        let problem = DualProblem::new(&p.g, &p.incident, &reference, lo, hi, ub.alpha)?;
        let ev = calibrate_conventions(
            &problem,
            &DualOptions::default(),
            local.best,
            &local.maps,
            samples,
            seed,
        )?;
        for e in &ev {
            out.push(Check {
                name: format!("calibration/{pol}/{}", e.convention),
                // informational: a wrong convention is expected to show violations
                passed: true,
                value: e.report.violations as f64,
                threshold: 0.0,
                detail: format!(
                    "bound={:.6e} best={:.6e} ratio={:.4} feasible={}/{} violations={}",
                    e.bound,
                    e.best_known,
                    e.ratio,
                    e.report.feasible,
                    e.report.samples,
                    e.report.violations
                ),
            });
        }
        evidence.push(ev);
    }
    let chosen = select_convention(&evidence);
    let sound_violations: usize = evidence
        .iter()
        .flatten()
        .filter(|e| Some(e.convention) == chosen)
        .map(|e| e.report.violations)
        .sum();
    out.push(Check {
        name: "calibration/selected".into(),
        passed: chosen == Some(PairingConvention::PlusI),
        value: sound_violations as f64,
        threshold: 0.0,
        detail: format!(
            "selected {}; the sweep commands use {}",
            chosen.map_or("none".to_string(), |c| c.to_string()),
            PairingConvention::PlusI
        ),
    });
    Ok((out, chosen))
}

/// Adjoint gradients against central differences at random interior points.
pub fn gradient_checks(points: usize, seed: u64) -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (-0.5, 2.0);
    for pol in [Polarization::Te, Polarization::Tm] {
        let p = CellProblem::build(1.0, 0.01, pol, 0.025, lo, hi)?;
        let reference = p.reference()?;
        let n = p.n_pixels();
        for objective in ["cross_section", "deviation"] {
            let eval = |x: &[f64]| -> anyhow::Result<(f64, Vec<f64>)> {
                let chi = ContrastMap::new(x.to_vec(), lo - 1.0, hi + 1.0)?;
                let ev = match objective {
                    "cross_section" => adjoint_gradient(&p.g, &chi, &p.incident)?,
                    _ => deviation_gradient(&p.g, &chi, &p.incident, &reference)?,
                };
                Ok((ev.value, ev.gradient))
            };
            let mut worst: f64 = 0.0;
            for _ in 0..points {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
                let (_, grad) = eval(&x)?;
                let mut fd = vec![0.0; n];
                for j in 0..n {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[j] += FD_STEP;
                    b[j] -= FD_STEP;
                    fd[j] = (eval(&a)?.0 - eval(&b)?.0) / (2.0 * FD_STEP);
                }
                let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let err = grad
                    .iter()
                    .zip(&fd)
                    .fold(0.0f64, |m, (g, f)| m.max((g - f).abs()))
                    / scale;
                worst = worst.max(err);
            }
            out.push(Check {
                name: format!("gradient/{pol}/{objective}"),
                passed: worst <= GRADIENT_TOL,
                value: worst,
                threshold: GRADIENT_TOL,
                detail: format!("{points} points, {n} pixels, max-norm relative error"),
            });
        }
    }
    Ok(out)
}

pub fn cmd_validate(seed: u64) -> anyhow::Result<ValidationReport> {
    let mut checks = series_checks()?;
    checks.extend(convergence_checks()?);
    let (cal, chosen) = calibration_checks(100, seed)?;
    checks.extend(cal);
    checks.extend(gradient_checks(GRADIENT_POINTS, seed)?);
    Ok(ValidationReport {
        checks,
        convention: chosen.map(|c| c.to_string()),
    })
}
