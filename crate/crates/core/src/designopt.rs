//! Adjoint gradients and multi-start projected gradient ascent over
//! box-constrained contrast maps.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_with, ScatterSolution, VieSystem};
use crate::geometry::{ContrastMap, FieldArray};
use crate::greens::GreensOperator;

/// Stop once the objective changes by less than this, relative.
pub const REL_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 2000;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Objective value, its per-pixel gradient and the forward solution behind them.
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub solution: ScatterSolution,
}

/// Sums `Re/Im Σ_c conj(a_{jc}) b_{jc}` per pixel, scaled by `2 δA`.
fn pixel_pairing(
    a: &[Complex64],
    b: &[Complex64],
    components: usize,
    cell_area: f64,
    take_im: bool,
) -> Vec<f64> {
    a.chunks(components)
        .zip(b.chunks(components))
        .map(|(ap, bp)| {
            let s: Complex64 = ap.iter().zip(bp).map(|(x, y)| x.conj() * y).sum();
            2.0 * cell_area * if take_im { s.im } else { s.re }
        })
        .collect()
}

/// Cross-section functional and its gradient from one forward and one adjoint solve.
fn cross_section_with_system(
    g: &GreensOperator,
    system: &VieSystem,
    incident: &FieldArray,
) -> Result<Evaluation> {
    let solution = solve_with(g, system, incident)?;
    let rhs: Vec<_> = incident
        .values()
        .iter()
        .zip(system.diag())
        .map(|(e, c)| e * c)
        .collect();
    let w = system.lu().solve_adjoint(&rhs);
    let gw = g.apply_adjoint_raw(&w);
    let left: Vec<_> = incident
        .values()
        .iter()
        .zip(&gw)
        .map(|(a, b)| a + b)
        .collect();
    let grid = g.grid();
    let gradient = pixel_pairing(
        &left,
        solution.field.values(),
        g.polarization().components(),
        grid.cell_area(),
        true,
    );
    Ok(Evaluation {
        value: solution.cross_section,
        gradient,
        solution,
    })
}

/// Gradient of `2 Im⟨E_inc, χE(χ)⟩` with respect to each pixel contrast.
pub fn adjoint_gradient(
    g: &GreensOperator,
    chi: &ContrastMap,
    incident: &FieldArray,
) -> Result<Evaluation> {
    let system = VieSystem::new(g, chi)?;
    cross_section_with_system(g, &system, incident)
}

/// `‖E(χ) − E_ref‖²` and its gradient.
pub fn deviation_gradient(
    g: &GreensOperator,
    chi: &ContrastMap,
    incident: &FieldArray,
    reference: &FieldArray,
) -> Result<Evaluation> {
    reference.check_compatible(incident)?;
    let system = VieSystem::new(g, chi)?;
    let solution = solve_with(g, &system, incident)?;
    let r = solution.field.sub(reference)?;
    let value = r.norm().powi(2);
    let w = system.lu().solve_adjoint(r.values());
    let gw = g.apply_adjoint_raw(&w);
    let gradient = pixel_pairing(
        &gw,
        solution.field.values(),
        g.polarization().components(),
        g.grid().cell_area(),
        false,
    );
    Ok(Evaluation {
        value,
        gradient,
        solution,
    })
}

/// Outcome of one projected-ascent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AscentRun {
    pub chi: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: f64, upper: f64) {
    for v in x.iter_mut() {
        *v = v.clamp(lower, upper);
    }
}

/// Maximizes `objective` over the box by projected gradient ascent with
/// Armijo backtracking along the projection arc.
///
/// Any failed evaluation aborts the run with that error.
pub fn projected_ascent(
    objective: impl Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    start: Vec<f64>,
    lower: f64,
    upper: f64,
) -> Result<AscentRun> {
    let width = upper - lower;
    let mut x = start;
    project(&mut x, lower, upper);
    let (mut f, mut grad) = objective(&x)?;
    if width == 0.0 {
        return Ok(AscentRun {
            chi: x,
            value: f,
            iterations: 0,
            converged: true,
        });
    }
    let gmax = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = if gmax > 0.0 { width / gmax } else { 1.0 };
    for it in 1..=MAX_ITER {
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + step * gi).collect();
            project(&mut trial, lower, upper);
            let ascent: f64 = trial
                .iter()
                .zip(&x)
                .zip(&grad)
                .map(|((t, xi), gi)| gi * (t - xi))
                .sum();
            if ascent <= 0.0 {
                break;
            }
            let (ft, gt) = objective(&trial)?;
            if ft >= f + ARMIJO * ascent {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            return Ok(AscentRun {
                chi: x,
                value: f,
                iterations: it,
                converged: true,
            });
        };
        let change = (ft - f).abs() / f.abs().max(f64::MIN_POSITIVE);
        x = trial;
        f = ft;
        grad = gt;
        step *= 2.0;
        if change < REL_TOL {
            return Ok(AscentRun {
                chi: x,
                value: f,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(AscentRun {
        chi: x,
        value: f,
        iterations: MAX_ITER,
        converged: false,
    })
}

/// Deterministic restart starting points: χ+, χ̄, χ−, then i.i.d. uniform draws.
pub fn restart_starts(
    n_pixels: usize,
    lower: f64,
    upper: f64,
    restarts: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = 0.5 * (lower + upper);
    (0..restarts)
        .map(|r| match r {
            0 => vec![upper; n_pixels],
            1 => vec![mid; n_pixels],
            2 => vec![lower; n_pixels],
            _ => (0..n_pixels)
                .map(|_| {
                    if upper > lower {
                        rng.gen_range(lower..=upper)
                    } else {
                        lower
                    }
                })
                .collect(),
        })
        .collect()
}

/// One restart's outcome; failures are kept with their error message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RestartOutcome {
    Finished(AscentRun),
    Failed(String),
}

/// Runs `restarts` independent ascents in parallel and keeps them in restart order.
pub fn multi_start(
    objective: impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync,
    n_pixels: usize,
    lower: f64,
    upper: f64,
    restarts: usize,
    seed: u64,
) -> Result<Vec<RestartOutcome>> {
    if restarts == 0 {
        return Err(Error::InvalidInput(
            "at least one restart is required".into(),
        ));
    }
    crate::geometry::check_bounds(lower, upper)?;
    let starts = restart_starts(n_pixels, lower, upper, restarts, seed);
    Ok(starts
        .into_par_iter()
        .map(|s| match projected_ascent(&objective, s, lower, upper) {
            Ok(run) => RestartOutcome::Finished(run),
            Err(e) => RestartOutcome::Failed(e.to_string()),
        })
        .collect())
}

/// Multi-start local maximization of the cross-section functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalOptRun {
    /// Best contrast map found.
    pub best_chi: Vec<f64>,
    /// Best raw cross-section functional.
    pub best: f64,
    /// Final value of every restart that finished, in restart order.
    pub finals: Vec<f64>,
    /// Final map of every finished restart, aligned with `finals`.
    pub maps: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub unconverged: usize,
    pub failed: usize,
    pub failures: Vec<String>,
    pub seed: u64,
    pub lower: f64,
    pub upper: f64,
}

/// Collapses restart outcomes into the best run plus bookkeeping.
pub(crate) fn summarize(
    outcomes: Vec<RestartOutcome>,
    seed: u64,
    lower: f64,
    upper: f64,
) -> Result<LocalOptRun> {
    let mut best: Option<AscentRun> = None;
    let mut finals = Vec::new();
    let mut maps = Vec::new();
    let mut iterations = Vec::new();
    let mut failures = Vec::new();
    let mut unconverged = 0;
    for o in outcomes {
        match o {
            RestartOutcome::Finished(run) => {
                finals.push(run.value);
                maps.push(run.chi.clone());
                iterations.push(run.iterations);
                if !run.converged {
                    unconverged += 1;
                }
                if best.as_ref().is_none_or(|b| run.value > b.value) {
                    best = Some(run);
                }
            }
            RestartOutcome::Failed(msg) => failures.push(msg),
        }
    }
    let best = best.ok_or_else(|| {
        Error::InvalidInput(format!(
            "every restart failed: {}",
            failures.first().cloned().unwrap_or_default()
        ))
    })?;
    Ok(LocalOptRun {
        best_chi: best.chi,
        best: best.value,
        finals,
        maps,
        iterations,
        unconverged,
        failed: failures.len(),
        failures,
        seed,
        lower,
        upper,
    })
}

impl LocalOptRun {
    pub fn best_map(&self) -> Result<ContrastMap> {
        ContrastMap::new(self.best_chi.clone(), self.lower, self.upper)
    }
}

/// Maximizes the cross-section over `χ ∈ [lower, upper]` per pixel from `restarts` starts.
pub fn local_optimize(
    g: &GreensOperator,
    incident: &FieldArray,
    lower: f64,
    upper: f64,
    restarts: usize,
    seed: u64,
) -> Result<LocalOptRun> {
    let n = g.grid().n_pixels();
    let objective = |x: &[f64]| {
        let chi = ContrastMap::new(x.to_vec(), lower, upper)?;
        let ev = adjoint_gradient(g, &chi, incident)?;
        Ok((ev.value, ev.gradient))
    };
    let outcomes = multi_start(objective, n, lower, upper, restarts, seed)?;
    summarize(outcomes, seed, lower, upper)
}
