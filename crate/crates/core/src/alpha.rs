//! Field-deviation budget: the provable bound from the operator norm of
//! `(I − χ̄G)⁻¹G` and the multi-start local estimate.

use serde::{Deserialize, Serialize};

use crate::designopt::{deviation_gradient, multi_start, summarize, LocalOptRun};
use crate::error::Result;
use crate::forward::{operator_norm, system_matrix};
use crate::geometry::{check_bounds, ContrastMap, FieldArray};
use crate::greens::GreensOperator;
use crate::linalg::Lu;

/// Seed of the power-iteration start vector.
const NORM_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaResult {
    /// Budget value; `f64::INFINITY` on the divergent branch.
    pub alpha: f64,
    pub divergent: bool,
    /// ‖(I − χ̄G)⁻¹G‖, when it was computed.
    pub operator_norm: Option<f64>,
    /// Per-restart local optima, for the local estimate only.
    pub distribution: Vec<f64>,
    /// Per-restart optimizer maps, in the order of `distribution`.
    pub maps: Vec<Vec<f64>>,
    pub failed: usize,
}

/// `‖(I − χ̄G)⁻¹G‖`.
pub fn reference_operator_norm(g: &GreensOperator, chi_bar: f64) -> Result<f64> {
    let lu = Lu::factor(&system_matrix(g, &vec![chi_bar; g.dim()]))?;
    let m = g.matrix();
    let est = operator_norm(
        g.dim(),
        |x| lu.solve(&m.matvec(x)),
        |y| g.apply_adjoint_raw(&lu.solve_adjoint(y)),
        NORM_SEED,
    )?;
    Ok(est.value)
}

/// Closed-form bound from the norm `a = ‖(I − χ̄G)⁻¹G‖`: `aδχ/(1 − aδχ)` or ∞.
pub fn alpha_from_norm(norm: f64, half_width: f64) -> (f64, bool) {
    let p = norm * half_width;
    if p >= 1.0 {
        (f64::INFINITY, true)
    } else {
        (p / (1.0 - p), false)
    }
}

/// Provable upper bound on `‖E − E_ref‖/‖E_ref‖` over all `χ ∈ [χ−, χ+]`.
pub fn alpha_ub(g: &GreensOperator, lower: f64, upper: f64) -> Result<AlphaResult> {
    check_bounds(lower, upper)?;
    let chi_bar = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    if half == 0.0 {
        return Ok(AlphaResult {
            alpha: 0.0,
            divergent: false,
            operator_norm: None,
            distribution: Vec::new(),
            maps: Vec::new(),
            failed: 0,
        });
    }
    let norm = reference_operator_norm(g, chi_bar)?;
    let (alpha, divergent) = alpha_from_norm(norm, half);
    Ok(AlphaResult {
        alpha,
        divergent,
        operator_norm: Some(norm),
        distribution: Vec::new(),
        maps: Vec::new(),
        failed: 0,
    })
}

/// Locally maximized `‖E(χ) − E_ref‖/‖E_ref‖` from `restarts` projected-ascent runs.
///
/// The squared deviation is maximized and the square root taken at the end.
pub fn alpha_loc(
    g: &GreensOperator,
    lower: f64,
    upper: f64,
    incident: &FieldArray,
    reference: &FieldArray,
    restarts: usize,
    seed: u64,
) -> Result<AlphaResult> {
    check_bounds(lower, upper)?;
    let n = g.grid().n_pixels();
    let objective = |x: &[f64]| {
        let chi = ContrastMap::new(x.to_vec(), lower, upper)?;
        let ev = deviation_gradient(g, &chi, incident, reference)?;
        Ok((ev.value, ev.gradient))
    };
    let run: LocalOptRun = summarize(
        multi_start(objective, n, lower, upper, restarts, seed)?,
        seed,
        lower,
        upper,
    )?;
    let scale = reference.norm();
    let to_alpha = |v: f64| v.max(0.0).sqrt() / scale;
    Ok(AlphaResult {
        alpha: to_alpha(run.best),
        divergent: false,
        operator_norm: None,
        distribution: run.finals.iter().map(|&v| to_alpha(v)).collect(),
        maps: run.maps,
        failed: run.failed,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::forward::{reference_field, solve_vie};
    use crate::geometry::{PixelGrid, Polarization};
    use crate::greens::plane_wave;

    fn setup(radius: f64, spacing: f64, pol: Polarization) -> (GreensOperator, FieldArray) {
        let grid = Arc::new(PixelGrid::new(1.0, radius, spacing).unwrap());
        let g = GreensOperator::assemble(grid.clone(), pol);
        let e = plane_wave(&grid, pol, [1.0, 0.0]).unwrap();
        (g, e)
    }

    #[test]
    fn zero_width_box_gives_zero() {
        let (g, e) = setup(0.05, 0.01, Polarization::Te);
        assert_eq!(alpha_ub(&g, 0.7, 0.7).unwrap().alpha, 0.0);
        let r = reference_field(&g, 0.7, &e).unwrap();
        assert_eq!(alpha_loc(&g, 0.7, 0.7, &e, &r, 3, 1).unwrap().alpha, 0.0);
    }

    #[test]
    fn divergent_branch() {
        assert_eq!(alpha_from_norm(2.0, 0.5), (f64::INFINITY, true));
        assert_eq!(alpha_from_norm(1.0, 0.25), (1.0 / 3.0, false));
    }

    #[test]
    fn norm_matches_dense_svd() {
        let (g, _) = setup(0.04, 0.01, Polarization::Tm);
        let chi_bar = 0.8;
        let est = reference_operator_norm(&g, chi_bar).unwrap();
        let n = g.dim();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let v = g.matrix()[(i, j)];
            nalgebra::Complex::new(v.re, v.im)
        });
        let a = nalgebra::DMatrix::<nalgebra::Complex<f64>>::identity(n, n)
            - m.clone() * nalgebra::Complex::new(chi_bar, 0.0);
        let prod = a.lu().solve(&m).unwrap();
        let sv = prod.singular_values().max();
        assert!((est - sv).abs() <= 1e-8 * sv, "{est} vs {sv}");
    }

    /// Extreme eigenvalues of the Hermitian part `(G + Gᴴ)/2`.
    fn hermitian_part_range(g: &GreensOperator) -> (f64, f64) {
        let n = g.dim();
        let h = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let v = 0.5 * (g.matrix()[(i, j)] + g.matrix()[(j, i)].conj());
            nalgebra::Complex::new(v.re, v.im)
        });
        let ev = h.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    // On the box [min(0, χ0), max(0, χ0)], δχ‖(I − χ̄G)⁻¹G‖ ≥ 1 exactly when
    // χ̄⟨x, Gx⟩ has real part ≥ ‖x‖²/2 for some x, so the divergence
    // thresholds are 1/λmin and 1/λmax of the Hermitian part.
    #[test]
    fn divergence_thresholds_follow_hermitian_part() {
        for (pol, radius) in [
            (Polarization::Te, 0.05),
            (Polarization::Tm, 0.025),
            (Polarization::Tm, 0.1),
        ] {
            let grid = Arc::new(PixelGrid::new(1.0, radius, 0.02).unwrap());
            let g = GreensOperator::assemble(grid, pol);
            let (lmin, lmax) = hermitian_part_range(&g);
            let box_of = |c: f64| (f64::min(0.0, c), f64::max(0.0, c));
            for (lam, sign) in [(lmin, -1.0), (lmax, 1.0)] {
                if lam * sign <= 0.0 {
                    // no threshold on this side: stays finite arbitrarily far out
                    let (lo, hi) = box_of(sign * 1e4);
                    assert!(!alpha_ub(&g, lo, hi).unwrap().divergent, "{pol} R={radius}");
                    continue;
                }
                let cut = 1.0 / lam;
                let (lo, hi) = box_of(cut * (1.0 - 1e-6));
                assert!(
                    !alpha_ub(&g, lo, hi).unwrap().divergent,
                    "{pol} R={radius} below {cut}"
                );
                let (lo, hi) = box_of(cut * (1.0 + 1e-6));
                let r = alpha_ub(&g, lo, hi);
                assert!(
                    r.map_or(true, |r| r.divergent),
                    "{pol} R={radius} beyond {cut}"
                );
            }
        }
    }

    #[test]
    fn ub_dominates_random_sampling() {
        // five-pixel cross, the smallest centred lattice beyond a single pixel
        let (g, e) = setup(0.011, 0.01, Polarization::Te);
        assert_eq!(g.grid().n_pixels(), 5);
        let (lo, hi) = (0.0, 3.0);
        let ub = alpha_ub(&g, lo, hi).unwrap();
        assert!(!ub.divergent);
        let r = reference_field(&g, 0.5 * (lo + hi), &e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let chi =
                ContrastMap::new((0..5).map(|_| rng.gen_range(lo..=hi)).collect(), lo, hi).unwrap();
            let f = solve_vie(&g, &chi, &e).unwrap().field;
            worst = worst.max(f.sub(&r).unwrap().norm() / r.norm());
        }
        assert!(ub.alpha >= worst, "{} < {}", ub.alpha, worst);
    }

    #[test]
    fn single_pixel_loc_matches_enumeration() {
        let (g, e) = setup(0.007, 0.01, Polarization::Te);
        let gs = g.matrix()[(0, 0)];
        for (lo, hi) in [(0.0, 2.0), (-3.0, 0.0)] {
            let chi_bar = 0.5 * (lo + hi);
            let r = reference_field(&g, chi_bar, &e).unwrap();
            let loc = alpha_loc(&g, lo, hi, &e, &r, 50, 8).unwrap();
            let m = 10_000;
            let best = (0..=m)
                .map(|i| {
                    let c = lo + (hi - lo) * i as f64 / m as f64;
                    ((c - chi_bar) * gs / (1.0 - c * gs)).norm()
                })
                .fold(0.0, f64::max);
            assert!(
                (loc.alpha - best).abs() <= 1e-6 * best,
                "{} vs {}",
                loc.alpha,
                best
            );
            let ub = alpha_ub(&g, lo, hi).unwrap();
            assert!(loc.alpha <= ub.alpha);
        }
    }

    #[test]
    fn loc_below_ub_on_small_disc() {
        for pol in [Polarization::Te, Polarization::Tm] {
            let (g, e) = setup(0.03, 0.01, pol);
            let (lo, hi) = (0.0, 1.5);
            let r = reference_field(&g, 0.75, &e).unwrap();
            let loc = alpha_loc(&g, lo, hi, &e, &r, 4, 2).unwrap();
            let ub = alpha_ub(&g, lo, hi).unwrap();
            assert!(loc.alpha <= ub.alpha, "{pol}: {} > {}", loc.alpha, ub.alpha);
            assert_eq!(loc.distribution.len(), 4);
        }
    }

    #[test]
    fn ub_monotone_in_half_width() {
        let (g, _) = setup(0.04, 0.01, Polarization::Te);
        let mut prev = 0.0;
        for half in [0.1, 0.3, 0.6, 0.9] {
            let a = alpha_ub(&g, 1.0 - half, 1.0 + half).unwrap().alpha;
            assert!(a >= prev);
            prev = a;
        }
    }
}
