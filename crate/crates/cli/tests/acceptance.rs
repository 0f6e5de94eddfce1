//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The CI-profile sweep is run once per test binary and shared; the
//! determinism criterion runs it a second time into a separate directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use scatbound_cli::config::{linspace, AlphaMode, Profile, SweepConfig};
use scatbound_cli::sweep::CellProblem;
use scatbound_cli::validate::{
    convergence_checks, gradient_checks, series_checks, GRADIENT_POINTS,
};
use scatbound_cli::{cmd_alpha, cmd_bound, cmd_dual_at_alpha, cmd_localopt, cmd_verify};
use scatbound_core::alpha::{alpha_loc, alpha_ub, reference_operator_norm};
use scatbound_core::Polarization;
use tempfile::TempDir;

type Row = BTreeMap<String, String>;

const COMMANDS: [&str; 4] = ["bound", "alpha", "localopt", "dual_at_alpha"];

fn read_csv(path: &Path) -> Vec<Row> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.deserialize().map(|row| row.unwrap()).collect()
}

fn num(row: &Row, key: &str) -> Option<f64> {
    let v = row
        .get(key)
        .unwrap_or_else(|| panic!("missing column {key}"));
    (!v.is_empty()).then(|| v.parse().unwrap())
}

fn flag(row: &Row, key: &str) -> Option<bool> {
    let v = &row[key];
    (!v.is_empty()).then(|| v.parse().unwrap())
}

fn report(n: u32, name: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[criterion {n:2}] {tag} {name}: {detail}");
}

fn ci_config() -> SweepConfig {
    SweepConfig::profile(Profile::Ci)
}

/// Runs every sweep command of the CI profile into `dir`.
fn run_ci(dir: &Path) {
    let c = ci_config();
    for s in [
        cmd_bound(&c, dir).unwrap(),
        cmd_alpha(&c, dir).unwrap(),
        cmd_localopt(&c, dir).unwrap(),
        cmd_dual_at_alpha(&c, dir).unwrap(),
    ] {
        println!(
            "{}: {} rows, {} failed cells",
            s.command, s.rows, s.failed_cells
        );
    }
}

struct CiRun {
    _tmp: TempDir,
    dir: PathBuf,
}

fn ci_run() -> &'static CiRun {
    static RUN: OnceLock<CiRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let dir = tmp.path().join("ci");
        run_ci(&dir);
        CiRun { _tmp: tmp, dir }
    })
}

fn ci_rows(name: &str) -> Vec<Row> {
    read_csv(&ci_run().dir.join(format!("{name}.csv")))
}

/// Serializes tests that would otherwise compete for the single pool.
fn serial() -> std::sync::MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

#[test]
fn criterion_01_oracle_equivalence() {
    let _g = serial();
    let checks = series_checks().unwrap();
    for c in &checks {
        println!(
            "  {} error {:.3e} (limit {:.0e}) {}",
            c.name, c.value, c.threshold, c.detail
        );
    }
    let passed = checks.iter().all(|c| c.passed);
    report(
        1,
        "oracle equivalence",
        passed,
        "disc 2R = 0.2λ0, χ = 1, δx = λ0/100 against the series",
    );
    assert!(passed);
}

#[test]
fn criterion_02_grid_convergence() {
    let _g = serial();
    let checks = convergence_checks().unwrap();
    for c in &checks {
        println!("  {} ratio {:.3} {}", c.name, c.value, c.detail);
    }
    let passed = checks.iter().all(|c| c.passed);
    report(
        2,
        "grid convergence",
        passed,
        "successive differences shrink by at least 1.5x",
    );
    assert!(passed);
}

#[test]
fn criterion_03_certificate_soundness() {
    let _g = serial();
    let run = ci_run();
    let summary = cmd_verify(&run.dir).unwrap();
    let referenced: usize = ["bound", "dual_at_alpha"]
        .iter()
        .flat_map(|n| ci_rows(n))
        .filter(|r| !r["cert_path"].is_empty())
        .count();
    let worst = |f: fn(&scatbound_cli::verify::VerifyRow) -> Option<f64>| {
        summary.rows.iter().filter_map(f).fold(0.0f64, f64::max)
    };
    println!(
        "  {} certificates ({} referenced by CSV rows), {} failed; worst pinning {:.2e}, constraint {:.2e}, objective {:.2e}",
        summary.rows.len(),
        referenced,
        summary.failed(),
        worst(|r| r.pinning_residual),
        worst(|r| r.constraint_residual),
        worst(|r| r.objective_gap)
    );
    let bound = ci_rows("bound");
    let finite: Vec<&Row> = bound
        .iter()
        .filter(|r| flag(r, "divergent") == Some(false))
        .collect();
    let mut wd_ok = true;
    let (mut samples, mut violations) = (0.0, 0.0);
    for r in &finite {
        let s = num(r, "weak_duality_samples").unwrap_or(0.0);
        let v = num(r, "weak_duality_violations").unwrap_or(f64::NAN);
        samples += s;
        violations += v;
        if !(s >= 100.0 && v == 0.0) {
            wd_ok = false;
            println!(
                "  weak duality problem at {} R={} χ0={}: {s} samples, {v} violations",
                r["polarization"], r["R_over_lambda"], r["chi0"]
            );
        }
    }
    println!(
        "  weak duality: {} finite cells, {samples} structures, {violations} violations",
        finite.len()
    );
    let passed =
        summary.exit_code() == 0 && summary.rows.len() == referenced && wd_ok && !finite.is_empty();
    report(
        3,
        "certificate soundness",
        passed,
        "independent re-verification and weak-duality sampling",
    );
    assert!(passed);
}

#[test]
fn criterion_04_bound_dominance() {
    let _g = serial();
    let bound = ci_rows("bound");
    let localopt = ci_rows("localopt");
    let slack = 1e-9;
    let mut dominated = true;
    let mut checked = 0;
    for (b, l) in bound.iter().zip(&localopt) {
        assert_eq!(
            (&b["polarization"], &b["R_over_lambda"], &b["chi0"]),
            (&l["polarization"], &l["R_over_lambda"], &l["chi0"])
        );
        if flag(b, "divergent") != Some(false) {
            continue;
        }
        let d = num(b, "neg_d_over_lambda").unwrap();
        for best in [
            num(b, "localopt_best_over_lambda"),
            num(l, "best_over_lambda"),
        ]
        .into_iter()
        .flatten()
        {
            checked += 1;
            if best > d + slack * d.abs().max(best.abs()) {
                dominated = false;
                println!(
                    "  violation at {} R={} χ0={}: {best} > {d}",
                    b["polarization"], b["R_over_lambda"], b["chi0"]
                );
            }
        }
    }
    let mut window = true;
    let mut ratios = Vec::new();
    for b in &bound {
        let chi0: f64 = b["chi0"].parse().unwrap();
        if b["polarization"] == "TE" && b["R_over_lambda"] == "0.025" && chi0 > 0.0 && chi0 <= 1.0 {
            let ratio = num(b, "ratio").unwrap_or(f64::NAN);
            ratios.push((chi0, ratio));
            window &= (1.0..=1.3).contains(&ratio);
        }
    }
    println!("  {checked} local optima checked against −d(α_ub)");
    println!("  TE 2R = 0.05λ0 ratios: {ratios:?}");
    let passed = dominated && window && checked > 0 && ratios.len() == 4;
    report(
        4,
        "bound dominance",
        passed,
        "local optima below −d(α_ub); TE small-disc ratio within [1.0, 1.3]",
    );
    assert!(passed);
}

#[test]
fn criterion_05_divergence_structure() {
    let _g = serial();
    let rows = ci_rows("alpha");
    let c = ci_config();
    let mut tm_ok = true;
    let mut te_ok = true;
    let mut cutoff_ok = true;
    for pol in ["TE", "TM"] {
        for (ri, &radius) in c.radii.iter().enumerate() {
            let series: Vec<(f64, bool, Option<f64>)> = rows
                .iter()
                .filter(|r| {
                    r["polarization"] == pol && r["R_over_lambda"].parse::<f64>().unwrap() == radius
                })
                .map(|r| {
                    (
                        r["chi0"].parse().unwrap(),
                        flag(r, "divergent").unwrap(),
                        num(r, "operator_norm"),
                    )
                })
                .collect();
            let n_pixels = rows
                .iter()
                .find(|r| r["R_over_lambda"].parse::<f64>().unwrap() == radius)
                .map(|r| r["n_pixels"].clone())
                .unwrap();
            if pol == "TM" {
                let finite: Vec<f64> = series
                    .iter()
                    .filter(|s| s.0 <= -1.0 && !s.1)
                    .map(|s| s.0)
                    .collect();
                if !finite.is_empty() {
                    tm_ok = false;
                    let at_minus_one = series.iter().find(|s| s.0 == -1.0).and_then(|s| s.2);
                    println!(
                        "  TM R={radius} (N={n_pixels}): finite α_ub at χ0 = {finite:?}; δχ·‖(I − χ̄G)⁻¹G‖ at χ0 = −1 is {:.4}",
                        at_minus_one.map_or(f64::NAN, |a| 0.5 * a)
                    );
                }
            } else {
                let bad: Vec<f64> = series
                    .iter()
                    .filter(|s| s.0 < 0.0 && s.0 >= -4.0 && s.1)
                    .map(|s| s.0)
                    .collect();
                if !bad.is_empty() {
                    te_ok = false;
                    println!("  TE R={radius}: divergent at negative χ0 = {bad:?}");
                }
            }
            // positive cutoff: first divergent χ0 on the grid or on an extended scan
            let on_grid = series
                .iter()
                .filter(|s| s.0 > 0.0 && s.1)
                .map(|s| s.0)
                .reduce(f64::min);
            let cutoff = on_grid.or_else(|| {
                let p = CellProblem::build(
                    c.wavelength,
                    c.spacing,
                    pol.parse().unwrap(),
                    radius,
                    0.0,
                    1.0,
                )
                .unwrap();
                let mut chi0 = 8.0;
                while chi0 <= 4096.0 {
                    if alpha_ub(&p.g, 0.0, chi0).map_or(true, |a| a.divergent) {
                        return Some(chi0);
                    }
                    chi0 *= 2.0;
                }
                None
            });
            let beyond_ok =
                cutoff.is_some_and(|cut| series.iter().filter(|s| s.0 >= cut).all(|s| s.1));
            cutoff_ok &= beyond_ok;
            println!("  {pol} R={radius} (r{ri}, N={n_pixels}): positive cutoff χ0 ≈ {cutoff:?}, all divergent beyond: {beyond_ok}");
        }
    }
    if !tm_ok {
        // continuum context: the static norm grows with the pixel count
        let mut table = Vec::new();
        for radius in [0.025, 0.05, 0.1] {
            let p = CellProblem::build(1.0, 0.02, Polarization::Tm, radius, -1.0, 0.0).unwrap();
            let norm = reference_operator_norm(&p.g, -0.5).unwrap();
            table.push(format!("N={} product={:.4}", p.n_pixels(), 0.5 * norm));
        }
        println!(
            "  TM χ0 = −1 product by pixel count at δx = λ0/50: {}",
            table.join(", ")
        );
        println!("  the product crosses 1 only once the disc holds enough pixels; coarse small discs stay finite");
    }
    report(5, "TM divergence for χ0 ≤ −1", tm_ok, "every tested radius");
    report(5, "TE finite for χ0 ∈ [−4, 0)", te_ok, "2R ≤ 0.2λ0");
    report(
        5,
        "positive-χ0 cutoff",
        cutoff_ok,
        "per radius and polarization",
    );
    assert!(tm_ok && te_ok && cutoff_ok);
}

#[test]
fn criterion_06_monotonicity() {
    let _g = serial();
    let c = ci_config();
    let AlphaMode::List(alphas) = &c.alpha else {
        panic!("CI profile uses an α list")
    };
    let rows = ci_rows("dual_at_alpha");
    let mut ok = alphas.len() >= 10;
    let mut series = 0;
    for pol in ["TE", "TM"] {
        for chi0 in &c.contrasts {
            let vals: Vec<(f64, Option<f64>)> = rows
                .iter()
                .filter(|r| {
                    r["polarization"] == pol
                        && r["R_over_lambda"] == "0.1"
                        && r["chi0"].parse::<f64>().unwrap() == *chi0
                })
                .map(|r| (num(r, "alpha").unwrap(), num(r, "neg_d_over_lambda")))
                .collect();
            assert_eq!(vals.len(), alphas.len());
            series += 1;
            let mut prev = f64::NEG_INFINITY;
            for (a, v) in vals {
                let Some(v) = v else {
                    ok = false;
                    println!("  {pol} χ0={chi0} α={a}: no value");
                    continue;
                };
                if v < prev {
                    ok = false;
                    println!("  {pol} χ0={chi0}: −d drops at α={a}: {v} < {prev}");
                }
                prev = v;
            }
        }
    }
    println!(
        "  {series} curves over {} α values at 2R = 0.2λ0",
        alphas.len()
    );
    report(6, "monotonicity of −d(α)", ok, "both polarizations");
    assert!(ok);
}

#[test]
fn criterion_07_alpha_consistency() {
    let _g = serial();
    let rows = ci_rows("alpha");
    let mut dominated = true;
    let mut checked = 0;
    for r in rows.iter().filter(|r| flag(r, "divergent") == Some(false)) {
        let (lo, ub) = (num(r, "alpha_loc"), num(r, "alpha_ub").unwrap());
        let Some(lo) = lo else { continue };
        checked += 1;
        if lo > ub {
            dominated = false;
            println!(
                "  {} R={} χ0={}: α_loc {lo} > α_ub {ub}",
                r["polarization"], r["R_over_lambda"], r["chi0"]
            );
        }
    }
    // single-pixel instances: R = δx leaves only the centre pixel
    let mut oracle_ok = true;
    let mut worst: f64 = 0.0;
    for pol in [Polarization::Te, Polarization::Tm] {
        for chi0 in [-4.0, -1.5, -0.5, 0.5, 2.0, 4.0] {
            let (lo, hi) = (f64::min(0.0, chi0), f64::max(0.0, chi0));
            let p = CellProblem::build(1.0, 0.01, pol, 0.01, lo, hi).unwrap();
            assert_eq!(p.n_pixels(), 1);
            let reference = p.reference().unwrap();
            let loc = alpha_loc(&p.g, lo, hi, &p.incident, &reference, 50, 11)
                .unwrap()
                .alpha;
            let gs = p.g.matrix()[(0, 0)];
            let chi_bar = 0.5 * (lo + hi);
            let f = |c: f64| ((c - chi_bar) * gs / (1.0 - c * gs)).norm();
            let m = 200_000;
            let h = (hi - lo) / m as f64;
            let (i_best, _) = (0..=m)
                .map(|i| (i, f(lo + h * i as f64)))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            // resonant peaks are narrower than the grid step: ternary search
            // on the bracketing cells
            let (mut a, mut b) = (
                (lo + h * (i_best as f64 - 1.0)).max(lo),
                (lo + h * (i_best as f64 + 1.0)).min(hi),
            );
            for _ in 0..200 {
                let (m1, m2) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
                if f(m1) < f(m2) {
                    a = m1;
                } else {
                    b = m2;
                }
            }
            let best = f(0.5 * (a + b)).max(f(lo + h * i_best as f64));
            let err = (loc - best).abs() / best;
            worst = worst.max(err);
            oracle_ok &= err <= 1e-6;
        }
    }
    println!("  {checked} finite cells; single-pixel worst relative error {worst:.2e}");
    let passed = dominated && oracle_ok && checked > 0;
    report(
        7,
        "α consistency",
        passed,
        "α_loc ≤ α_ub and single-pixel enumeration to 1e-6",
    );
    assert!(passed);
}

#[test]
fn criterion_08_gradient_checks() {
    let _g = serial();
    let checks = gradient_checks(GRADIENT_POINTS, 5).unwrap();
    for c in &checks {
        println!(
            "  {} worst relative error {:.2e} ({})",
            c.name, c.value, c.detail
        );
    }
    let passed = checks.iter().all(|c| c.passed) && checks.len() == 4;
    report(
        8,
        "gradient checks",
        passed,
        "adjoint vs central differences ≤ 1e-4",
    );
    assert!(passed);
}

#[test]
fn criterion_09_non_dominance_recorded() {
    let _g = serial();
    let tmp = TempDir::new().unwrap();
    let mut c = ci_config();
    c.alpha = AlphaMode::Loc;
    c.radii = vec![0.05, 0.1];
    c.contrasts = linspace(-4.0, 4.0, 9);
    let s = cmd_dual_at_alpha(&c, tmp.path()).unwrap();
    let rows = read_csv(&s.csv);
    let expected = c.polarizations.len() * c.radii.len() * c.contrasts.len();
    let uncertified = rows
        .iter()
        .all(|r| r["alpha_kind"] == "loc" && r["certified_bound"] == "false");
    let recorded = rows
        .iter()
        .filter(|r| flag(r, "localopt_exceeds").is_some())
        .count();
    let exceeding: Vec<String> = rows
        .iter()
        .filter(|r| flag(r, "localopt_exceeds") == Some(true))
        .map(|r| {
            format!(
                "{} R={} χ0={}",
                r["polarization"], r["R_over_lambda"], r["chi0"]
            )
        })
        .collect();
    println!("  {} rows, {recorded} comparisons recorded, local optimum above −d(α_loc) at {} cells {exceeding:?}", rows.len(), exceeding.len());
    let passed = rows.len() == expected && uncertified && recorded > 0 && s.failed_cells == 0;
    report(
        9,
        "non-dominance of d(α_loc) recorded",
        passed,
        "rows marked as not a bound, exceedances kept",
    );
    assert!(passed);
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let first = &ci_run().dir;
    let tmp = TempDir::new().unwrap();
    let second = tmp.path().join("ci");
    run_ci(&second);
    let mut identical = true;
    for name in COMMANDS {
        let a = fs::read(first.join(format!("{name}.csv"))).unwrap();
        let b = fs::read(second.join(format!("{name}.csv"))).unwrap();
        println!("  {name}.csv: {} bytes, identical: {}", a.len(), a == b);
        identical &= a == b;
    }
    report(
        10,
        "determinism",
        identical,
        "two CI-profile runs with the same seed",
    );
    assert!(identical);
}
