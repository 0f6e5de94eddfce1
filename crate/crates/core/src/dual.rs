//! Lagrangian dual bound on the cross-section functional under a box
//! constraint on the contrast and a ball constraint `‖E − E_ref‖ ≤ α‖E_ref‖`.
//!
//! For any field `V` and scale `λ > 0`, with `S = G†V + c` and `c = iE_inc`,
//!
//! ```text
//! D(V, λ) = 2 Re⟨V, E_ref − E_inc⟩ − δA Σ_i β_i − λ α² ‖E_ref‖²
//! β_i     = max_{s ∈ {χ−, χ+}} |V_i − s S_i|²/λ + 2 s Re(S_iᴴ E_ref,i)
//! ```
//!
//! satisfies `2 Im⟨E_inc, Φ⟩ ≤ −D(V, λ)` for every feasible structure: write
//! `E = E_ref + F`, bound the cross term `2 Re((V_i − χ_i S_i)ᴴ F_i)` by
//! `|V_i − χ_i S_i|²/λ + λ|F_i|²`, and use convexity in `χ_i` to move to the
//! endpoints. Any `(V, λ)` therefore certifies a bound; the solver only makes
//! it tight.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_bounds, FieldArray, Polarization};
use crate::greens::GreensOperator;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Maximum constraint and pinning residual accepted by [`DualCertificate::verify`].
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Maximum relative objective mismatch accepted by [`DualCertificate::verify`].
pub const OBJECTIVE_TOL: f64 = 1e-12;

/// Multiple of `i E_inc` that pins `S − G†V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairingConvention {
    /// `c = +i E_inc`; the convention under which the bound is proven.
    PlusI,
    /// `c = −i E_inc`.
    MinusI,
    /// `c = −2i E_inc`.
    MinusTwoI,
}

impl PairingConvention {
    pub const ALL: [PairingConvention; 3] = [Self::PlusI, Self::MinusI, Self::MinusTwoI];

    pub fn factor(self) -> Complex64 {
        match self {
            Self::PlusI => I,
            Self::MinusI => -I,
            Self::MinusTwoI => -2.0 * I,
        }
    }
}

impl std::fmt::Display for PairingConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PlusI => "+i",
            Self::MinusI => "-i",
            Self::MinusTwoI => "-2i",
        })
    }
}

/// Objective whose conjugate pins `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// The linear cross-section functional `−2 Im⟨E_inc, Φ⟩`.
    CrossSection,
    /// Placeholder for a general convex objective; not supported.
    Nonlinear,
}

/// `S = G†V + c`.
pub fn fenchel_eliminate(
    incident: &FieldArray,
    v: &FieldArray,
    g: &GreensOperator,
    convention: PairingConvention,
    objective: Objective,
) -> Result<FieldArray> {
    if objective != Objective::CrossSection {
        return Err(Error::Unsupported(
            "only the linear cross-section objective has a closed-form conjugate".into(),
        ));
    }
    v.check_compatible(incident)?;
    let gv = g.apply_adjoint(v)?;
    gv.add(&incident.scaled(convention.factor()))
}

/// Fixed data of one dual program.
#[derive(Debug, Clone)]
pub struct DualProblem<'a> {
    pub g: &'a GreensOperator,
    pub incident: &'a FieldArray,
    pub reference: &'a FieldArray,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub convention: PairingConvention,
}

/// Value, gradient and per-pixel β of the (possibly smoothed) dual function.
struct DualEval {
    value: f64,
    grad_v: Vec<Complex64>,
    grad_mu: f64,
    s: Vec<Complex64>,
    beta: Vec<f64>,
}

impl<'a> DualProblem<'a> {
    pub fn new(
        g: &'a GreensOperator,
        incident: &'a FieldArray,
        reference: &'a FieldArray,
        lower: f64,
        upper: f64,
        alpha: f64,
    ) -> Result<Self> {
        check_bounds(lower, upper)?;
        incident.check_compatible(reference)?;
        if incident.polarization() != g.polarization()
            || !crate::geometry::same_grid(incident.grid(), g.grid())
        {
            return Err(Error::Incompatible(
                "fields do not match the operator".into(),
            ));
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "α must be nonnegative, got {alpha}"
            )));
        }
        Ok(Self {
            g,
            incident,
            reference,
            lower,
            upper,
            alpha,
            convention: PairingConvention::PlusI,
        })
    }

    pub fn with_convention(mut self, convention: PairingConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    /// `ρ = ‖E_ref‖²`, the radius scale of the field ball.
    pub fn constraint_norm_sq(&self) -> f64 {
        self.reference.norm().powi(2)
    }

    /// Smallest admissible dual scale, `1e−12 ‖E_inc‖²`.
    pub fn lambda_min(&self) -> f64 {
        1e-12 * self.incident.norm().powi(2)
    }

    fn dim(&self) -> usize {
        self.incident.len()
    }

    fn pinned(&self, v: &[Complex64]) -> Vec<Complex64> {
        let c = self.convention.factor();
        self.g
            .apply_adjoint_raw(v)
            .into_iter()
            .zip(self.incident.values())
            .map(|(gv, e)| gv + c * e)
            .collect()
    }

    /// Dual function at `(V, λ = e^μ)`. With `tau = None` the per-pixel max is
    /// exact; otherwise it is replaced by `τ log Σ exp(h/τ)`.
    fn evaluate(&self, v: &[Complex64], mu: f64, tau: Option<f64>) -> DualEval {
        let lambda = mu.exp();
        let d = self.g.polarization().components();
        let da = self.g.grid().cell_area();
        let r = self.reference.values();
        let e = self.incident.values();
        let s = self.pinned(v);
        let ends = [self.lower, self.upper];
        let n = self.dim() / d;
        let mut beta = Vec::with_capacity(n);
        let mut p = vec![Complex64::new(0.0, 0.0); self.dim()];
        let mut q = vec![Complex64::new(0.0, 0.0); self.dim()];
        let mut quad_sum = 0.0;
        for i in 0..n {
            let idx = i * d..(i + 1) * d;
            let mut h = [0.0; 2];
            let mut usq = [0.0; 2];
            for (t, &sv) in ends.iter().enumerate() {
                let mut u2 = 0.0;
                let mut cross = 0.0;
                for j in idx.clone() {
                    u2 += (v[j] - s[j] * sv).norm_sqr();
                    cross += (s[j].conj() * r[j]).re;
                }
                usq[t] = u2;
                h[t] = u2 / lambda + 2.0 * sv * cross;
            }
            let (b, w) = match tau {
                None => {
                    if h[1] > h[0] {
                        (h[1], [0.0, 1.0])
                    } else {
                        (h[0], [1.0, 0.0])
                    }
                }
                Some(tau) => {
                    let m = h[0].max(h[1]);
                    let z0 = ((h[0] - m) / tau).exp();
                    let z1 = ((h[1] - m) / tau).exp();
                    let z = z0 + z1;
                    (m + tau * z.ln(), [z0 / z, z1 / z])
                }
            };
            beta.push(b);
            for (t, &sv) in ends.iter().enumerate() {
                if w[t] == 0.0 {
                    continue;
                }
                quad_sum += w[t] * usq[t];
                for j in idx.clone() {
                    let u = v[j] - s[j] * sv;
                    p[j] += w[t] * 2.0 * u / lambda;
                    q[j] += w[t] * 2.0 * sv * (r[j] - u / lambda);
                }
            }
        }
        let rho = self.constraint_norm_sq();
        let linear: f64 = v
            .iter()
            .zip(r.iter().zip(e))
            .map(|(vi, (ri, ei))| (vi.conj() * (ri - ei)).re)
            .sum::<f64>();
        let value = 2.0 * da * linear
            - da * beta.iter().sum::<f64>()
            - lambda * self.alpha * self.alpha * rho;
        let gq = self.g.matrix().matvec(&q);
        let grad_v = (0..self.dim())
            .map(|j| 2.0 * da * (r[j] - e[j]) - da * (p[j] + gq[j]))
            .collect();
        let grad_mu = lambda * (da * quad_sum / (lambda * lambda) - self.alpha * self.alpha * rho);
        DualEval {
            value,
            grad_v,
            grad_mu,
            s,
            beta,
        }
    }

    /// Exact dual value and certificate at an arbitrary `(V, λ)`.
    pub fn dual_objective(&self, v: &FieldArray, lambda: f64) -> Result<(f64, DualCertificate)> {
        v.check_compatible(self.incident)?;
        let lambda_min = self.lambda_min();
        if !(lambda >= lambda_min) || !lambda.is_finite() {
            return Err(Error::DualScaleTooSmall { lambda, lambda_min });
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidInput("α = ∞ has no finite dual value".into()));
        }
        let ev = self.evaluate(v.values(), lambda.ln(), None);
        let cert = self.certificate(v.values().to_vec(), lambda, ev, SolveStats::default());
        Ok((cert.value, cert))
    }

    fn certificate(
        &self,
        v: Vec<Complex64>,
        lambda: f64,
        ev: DualEval,
        stats: SolveStats,
    ) -> DualCertificate {
        let grid = self.g.grid();
        DualCertificate {
            polarization: self.g.polarization(),
            wavelength: grid.wavelength(),
            radius: grid.radius(),
            spacing: grid.spacing(),
            lower: self.lower,
            upper: self.upper,
            alpha: self.alpha,
            convention: self.convention,
            constraint_norm_sq: self.constraint_norm_sq(),
            lambda,
            v,
            s: ev.s,
            beta: ev.beta,
            value: ev.value,
            iterations: stats.iterations,
            converged: stats.converged,
        }
    }

    /// Best λ for `V = 0` by golden-section search on `log λ`.
    fn initial_mu(&self, v: &[Complex64]) -> f64 {
        let lo = self.lambda_min().ln();
        let hi = lo + 24.0 * std::f64::consts::LN_10;
        let f = |mu: f64| self.evaluate(v, mu, None).value;
        let (mut a, mut b) = (lo, hi);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..120 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d);
            }
        }
        0.5 * (a + b)
    }
}

/// Controls of [`solve_dual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualOptions {
    /// Total iteration cap over all temperature stages.
    pub max_iter: usize,
    /// Number of temperature stages; the temperature halves after each.
    pub stages: usize,
    /// L-BFGS history length.
    pub memory: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            stages: 6,
            memory: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SolveStats {
    iterations: usize,
    converged: bool,
}

/// Feasible dual point with its exactly evaluated bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualCertificate {
    pub polarization: Polarization,
    pub wavelength: f64,
    pub radius: f64,
    pub spacing: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub convention: PairingConvention,
    /// ρ in the λα²ρ term.
    pub constraint_norm_sq: f64,
    pub lambda: f64,
    pub v: Vec<Complex64>,
    pub s: Vec<Complex64>,
    pub beta: Vec<f64>,
    /// Certified dual value d; the cross-section bound is `−d`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of recomputing a certificate from scratch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Verification {
    /// `‖S − (G†V + c)‖ / max(1, ‖S‖)`, unweighted.
    pub pinning_residual: f64,
    /// Largest `h_i(s) − β_i` over pixels and endpoints, relative to `max(1, |β_i|)`.
    pub constraint_residual: f64,
    /// `|d − d_recomputed|` relative to the magnitude of the summed terms.
    pub objective_gap: f64,
    /// The recomputed d.
    pub recomputed: f64,
    pub passed: bool,
}

impl DualCertificate {
    /// Cross-section bound `−d`.
    pub fn bound(&self) -> f64 {
        -self.value
    }

    /// Recomputes every stored quantity from `(V, S, β, λ)` and the problem data.
    ///
    /// This is a separate plain loop from the solver's evaluator.
    pub fn verify(
        &self,
        g: &GreensOperator,
        incident: &FieldArray,
        reference: &FieldArray,
    ) -> Result<Verification> {
        let n = incident.len();
        let d = incident.polarization().components();
        if self.v.len() != n
            || self.s.len() != n
            || self.beta.len() * d != n
            || reference.len() != n
        {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: self.v.len(),
            });
        }
        if !(self.lambda > 0.0) || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("certificate".into()));
        }
        let c = self.convention.factor();
        let m = g.matrix();
        // S = conj(G) V + c E_inc, row by row
        let mut pin_num = 0.0;
        let mut s_norm = 0.0;
        for i in 0..n {
            let row = m.row(i);
            let mut acc = c * incident.values()[i];
            for (gij, vj) in row.iter().zip(&self.v) {
                acc += gij.conj() * vj;
            }
            pin_num += (acc - self.s[i]).norm_sqr();
            s_norm += self.s[i].norm_sqr();
        }
        let pinning_residual = pin_num.sqrt() / s_norm.sqrt().max(1.0);

        let r = reference.values();
        let e = incident.values();
        let mut constraint_residual: f64 = 0.0;
        for (i, &b) in self.beta.iter().enumerate() {
            for s in [self.lower, self.upper] {
                let mut u2 = 0.0;
                let mut cross = 0.0;
                for j in i * d..(i + 1) * d {
                    let u = self.v[j] - s * self.s[j];
                    u2 += u.re * u.re + u.im * u.im;
                    cross += self.s[j].re * r[j].re + self.s[j].im * r[j].im;
                }
                let h = u2 / self.lambda + 2.0 * s * cross;
                constraint_residual = constraint_residual.max((h - b) / b.abs().max(1.0));
            }
        }

        let da = incident.grid().cell_area();
        let mut linear = 0.0;
        for j in 0..n {
            let diff = r[j] - e[j];
            linear += self.v[j].re * diff.re + self.v[j].im * diff.im;
        }
        let linear = 2.0 * da * linear;
        let beta_sum = da * self.beta.iter().sum::<f64>();
        let penalty = self.lambda * self.alpha * self.alpha * self.constraint_norm_sq;
        let recomputed = linear - beta_sum - penalty;
        let scale = linear.abs() + beta_sum.abs() + penalty.abs();
        let objective_gap = (recomputed - self.value).abs() / scale.max(f64::MIN_POSITIVE);
        let rho_gap = (reference.norm().powi(2) - self.constraint_norm_sq).abs()
            / self.constraint_norm_sq.max(f64::MIN_POSITIVE);
        let passed = pinning_residual <= RESIDUAL_TOL
            && constraint_residual <= RESIDUAL_TOL
            && objective_gap <= OBJECTIVE_TOL
            && rho_gap <= 1e-12;
        Ok(Verification {
            pinning_residual,
            constraint_residual,
            objective_gap,
            recomputed,
            passed,
        })
    }
}

/// Bound at one α: a certificate, or the unbounded sentinel for α = ∞.
#[derive(Debug, Clone)]
pub enum Bound {
    Certified(Box<DualCertificate>),
    Unbounded,
}

impl Bound {
    /// `−d`, or `+∞` when unbounded.
    pub fn value(&self) -> f64 {
        match self {
            Self::Certified(c) => c.bound(),
            Self::Unbounded => f64::INFINITY,
        }
    }
}

fn pack(v: &[Complex64], mu: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * v.len() + 1);
    for z in v {
        x.push(z.re);
        x.push(z.im);
    }
    x.push(mu);
    x
}

fn unpack(x: &[f64]) -> (Vec<Complex64>, f64) {
    let n = (x.len() - 1) / 2;
    let v = (0..n)
        .map(|j| Complex64::new(x[2 * j], x[2 * j + 1]))
        .collect();
    (v, x[x.len() - 1])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes the smoothed dual at temperature `tau` by L-BFGS from `x`.
/// Returns the final point and the iterations used.
fn lbfgs_stage(
    problem: &DualProblem,
    mut x: Vec<f64>,
    tau: f64,
    budget: usize,
    memory: usize,
    mu_min: f64,
    history: &mut Vec<f64>,
) -> (Vec<f64>, usize) {
    // minimize F = −D_τ
    let eval = |x: &[f64]| {
        let (v, mu) = unpack(x);
        let ev = problem.evaluate(&v, mu, Some(tau));
        (-ev.value, {
            let mut g = pack(&ev.grad_v, ev.grad_mu);
            for gi in g.iter_mut() {
                *gi = -*gi;
            }
            g
        })
    };
    let (mut f, mut g) = eval(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut stall = 0;
    let mut used = 0;
    while used < budget {
        used += 1;
        // two-loop recursion
        let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alphas[i] = rho * dot(&s_hist[i], &dir);
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alphas[i] * y;
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1.0 / dot(&g, &g).sqrt().max(f64::MIN_POSITIVE)
        };
        for d in dir.iter_mut() {
            *d *= gamma;
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alphas[i] - beta) * s;
            }
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            dir = g.iter().map(|v| -v).collect();
            s_hist.clear();
            y_hist.clear();
            slope = dot(&g, &dir);
            let scale = 1.0 / dot(&g, &g).sqrt().max(f64::MIN_POSITIVE);
            for d in dir.iter_mut() {
                *d *= scale;
            }
            slope *= scale;
            if !(slope < 0.0) {
                break;
            }
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let last = trial.len() - 1;
            trial[last] = trial[last].max(mu_min);
            let (ft, gt) = eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            break;
        };
        let sv: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-300 {
            if s_hist.len() == memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(sv);
            y_hist.push(yv);
        }
        let improvement = (f - fnew) / f.abs().max(1e-300);
        x = xn;
        f = fnew;
        g = gn;
        history.push(-f);
        if improvement < 1e-15 {
            stall += 1;
            if stall >= 10 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    (x, used)
}

/// Maximizes the dual function, returning the best exactly evaluated certificate.
///
/// The per-pixel endpoint max is smoothed with a temperature that starts at
/// the median endpoint gap and halves over `options.stages` stages; each
/// stage ends with an exact evaluation and the best one is kept. The
/// certificate is flagged unconverged when the smoothed objective still rose
/// by more than 1e−4 (relative) over the last tenth of the iterations.
pub fn solve_dual(problem: &DualProblem, options: &DualOptions) -> Result<DualCertificate> {
    solve_dual_from(problem, options, None)
}

/// [`solve_dual`] warm-started from `(V, λ)`.
pub fn solve_dual_from(
    problem: &DualProblem,
    options: &DualOptions,
    start: Option<(&[Complex64], f64)>,
) -> Result<DualCertificate> {
    if !problem.alpha.is_finite() {
        return Err(Error::InvalidInput(
            "α = ∞: the bound is unbounded, use `bound_at`".into(),
        ));
    }
    let mu_min = problem.lambda_min().ln();
    let (v0, mu0) = match start {
        Some((v, lambda)) => (v.to_vec(), lambda.max(problem.lambda_min()).ln()),
        None => {
            let v = vec![Complex64::new(0.0, 0.0); problem.dim()];
            let mu = problem.initial_mu(&v);
            (v, mu)
        }
    };
    let mut x = pack(&v0, mu0);
    let exact = |x: &[f64]| {
        let (v, mu) = unpack(x);
        let ev = problem.evaluate(&v, mu, None);
        (v, mu, ev)
    };
    let (bv, bmu, bev) = exact(&x);
    let mut best = (bv, bmu.exp(), bev);

    let tau0 = {
        let ends = [problem.lower, problem.upper];
        let (v, mu) = unpack(&x);
        let lambda = mu.exp();
        let s = problem.pinned(&v);
        let d = problem.g.polarization().components();
        let r = problem.reference.values();
        let mut gaps: Vec<f64> = (0..v.len() / d)
            .map(|i| {
                let h: Vec<f64> = ends
                    .iter()
                    .map(|&sv| {
                        (i * d..(i + 1) * d)
                            .map(|j| {
                                (v[j] - s[j] * sv).norm_sqr() / lambda
                                    + 2.0 * sv * (s[j].conj() * r[j]).re
                            })
                            .sum()
                    })
                    .collect();
                (h[0] - h[1]).abs()
            })
            .collect();
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = gaps[gaps.len() / 2];
        if med > 0.0 {
            med
        } else {
            1.0
        }
    };

    let stages = options.stages.max(1);
    let per_stage = (options.max_iter / stages).max(1);
    let mut tau = tau0;
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..stages {
        let (xn, used) = lbfgs_stage(
            problem,
            x,
            tau,
            per_stage,
            options.memory,
            mu_min,
            &mut history,
        );
        x = xn;
        iterations += used;
        let (v, mu, ev) = exact(&x);
        if ev.value > best.2.value {
            best = (v, mu.exp(), ev);
        }
        tau *= 0.5;
    }
    let converged = if iterations >= options.max_iter && history.len() >= 10 {
        let tail = history.len() / 10;
        let a = history[history.len() - 1 - tail];
        let b = history[history.len() - 1];
        (b - a) <= 1e-4 * b.abs().max(a.abs())
    } else {
        true
    };
    let (v, lambda, ev) = best;
    Ok(problem.certificate(
        v,
        lambda,
        ev,
        SolveStats {
            iterations,
            converged,
        },
    ))
}

/// Bound at the problem's α, short-circuiting α = ∞.
pub fn bound_at(problem: &DualProblem, options: &DualOptions) -> Result<Bound> {
    if problem.alpha.is_infinite() {
        return Ok(Bound::Unbounded);
    }
    Ok(Bound::Certified(Box::new(solve_dual(problem, options)?)))
}

/// Certificates along an α grid, made monotone.
///
/// A certificate found at a larger α also bounds every smaller α (its value
/// only grows as α decreases), so each α keeps the better of its own
/// certificate and the re-evaluated one from the next larger α.
pub fn solve_dual_path(
    problem: &DualProblem,
    alphas: &[f64],
    options: &DualOptions,
) -> Result<Vec<Bound>> {
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[b].partial_cmp(&alphas[a]).unwrap());
    let mut out: Vec<Option<Bound>> = vec![None; alphas.len()];
    let mut carried: Option<DualCertificate> = None;
    for idx in order {
        let p = problem.with_alpha(alphas[idx]);
        if !alphas[idx].is_finite() {
            out[idx] = Some(Bound::Unbounded);
            continue;
        }
        let own = solve_dual_from(
            &p,
            options,
            carried.as_ref().map(|c| (c.v.as_slice(), c.lambda)),
        )?;
        let mut best = own;
        if let Some(prev) = &carried {
            let v = p.incident.with_values(prev.v.clone());
            let (value, mut cert) = p.dual_objective(&v, prev.lambda)?;
            if value > best.value {
                cert.iterations = best.iterations;
                cert.converged = best.converged;
                best = cert;
            }
        }
        carried = Some(best.clone());
        out[idx] = Some(Bound::Certified(Box::new(best)));
    }
    Ok(out
        .into_iter()
        .map(|b| b.expect("every α visited"))
        .collect())
}

/// Result of checking a bound against sampled feasible structures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakDualityReport {
    /// Structures drawn.
    pub samples: usize,
    /// Structures inside the field ball, i.e. feasible for the bound.
    pub feasible: usize,
    /// Feasible structures whose cross-section exceeds the bound.
    pub violations: usize,
    /// Largest feasible cross-section seen.
    pub max_cross_section: f64,
    /// The bound tested, `−d`.
    pub bound: f64,
}

/// Relative slack for rounding when comparing a cross-section with a bound.
pub const WEAK_DUALITY_SLACK: f64 = 1e-9;

/// Draws `samples` random box-feasible contrasts (half i.i.d. uniform, half
/// i.i.d. endpoint choices), keeps those with `‖E − E_ref‖ ≤ α‖E_ref‖`, and
/// counts cross-sections above `bound`. Extra maps, such as local optima, are
/// tested as well.
pub fn weak_duality_check(
    problem: &DualProblem,
    bound: f64,
    samples: usize,
    extra: &[Vec<f64>],
    seed: u64,
) -> Result<WeakDualityReport> {
    use rand::{Rng, SeedableRng};
    use rayon::prelude::*;

    let n = problem.g.grid().n_pixels();
    let (lo, hi) = (problem.lower, problem.upper);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut maps: Vec<Vec<f64>> = (0..samples)
        .map(|k| {
            (0..n)
                .map(|_| {
                    if hi == lo {
                        lo
                    } else if k % 2 == 0 {
                        rng.gen_range(lo..=hi)
                    } else if rng.gen::<bool>() {
                        hi
                    } else {
                        lo
                    }
                })
                .collect()
        })
        .collect();
    maps.extend(extra.iter().cloned());
    let radius = problem.alpha * problem.reference.norm();
    let outcomes: Vec<Result<Option<f64>>> = maps
        .into_par_iter()
        .map(|m| {
            let chi = crate::geometry::ContrastMap::new(m, lo, hi)?;
            let sol = crate::forward::solve_vie(problem.g, &chi, problem.incident)?;
            let dev = sol.field.sub(problem.reference)?.norm();
            Ok((dev <= radius * (1.0 + 1e-12)).then_some(sol.cross_section))
        })
        .collect();
    let mut report = WeakDualityReport {
        samples: samples + extra.len(),
        feasible: 0,
        violations: 0,
        max_cross_section: f64::NEG_INFINITY,
        bound,
    };
    for o in outcomes {
        if let Some(sigma) = o? {
            report.feasible += 1;
            report.max_cross_section = report.max_cross_section.max(sigma);
            if sigma > bound + WEAK_DUALITY_SLACK * bound.abs().max(sigma.abs()) {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

/// Evidence for one pairing convention on one calibration instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConventionEvidence {
    pub convention: PairingConvention,
    pub bound: f64,
    pub best_known: f64,
    /// `bound / best_known`.
    pub ratio: f64,
    pub report: WeakDualityReport,
}

/// Runs the weak-duality suite under every convention and returns the evidence.
///
/// `best_known` is the best cross-section found by any other means (for
/// example local optimization); it is added to the sampled structures via
/// `extra` by the caller when its map is available.
pub fn calibrate_conventions(
    problem: &DualProblem,
    options: &DualOptions,
    best_known: f64,
    extra: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<Vec<ConventionEvidence>> {
    PairingConvention::ALL
        .iter()
        .map(|&conv| {
            let p = problem.clone().with_convention(conv);
            let cert = solve_dual(&p, options)?;
            let report = weak_duality_check(&p, cert.bound(), samples, extra, seed)?;
            Ok(ConventionEvidence {
                convention: conv,
                bound: cert.bound(),
                best_known,
                ratio: cert.bound() / best_known,
                report,
            })
        })
        .collect()
}

/// The convention with zero violations everywhere and the tightest worst-case
/// ratio, if exactly one qualifies as sound.
pub fn select_convention(evidence: &[Vec<ConventionEvidence>]) -> Option<PairingConvention> {
    let sound: Vec<(PairingConvention, f64)> = PairingConvention::ALL
        .iter()
        .filter_map(|&conv| {
            let mut worst: f64 = 0.0;
            for instance in evidence {
                let e = instance.iter().find(|e| e.convention == conv)?;
                if e.report.violations > 0 || !(e.ratio >= 1.0 - WEAK_DUALITY_SLACK) {
                    return None;
                }
                worst = worst.max(e.ratio);
            }
            Some((conv, worst))
        })
        .collect();
    match sound.as_slice() {
        [(conv, _)] => Some(*conv),
        _ => None,
    }
}
