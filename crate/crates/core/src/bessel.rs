//! Integer-order Bessel and Hankel functions of real positive argument.
//!
//! Small arguments use the ascending power series, large arguments use
//! Hankel's asymptotic expansion. The crossover sits at [`SERIES_LIMIT`],
//! where both branches agree to better than 1e-10 absolute.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

use num_complex::Complex64;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Arguments below this use the power series; at and above, the asymptotic expansion.
pub const SERIES_LIMIT: f64 = 14.0;

const MAX_TERMS: usize = 400;

/// J_n(x) by the ascending series. Accurate for x below [`SERIES_LIMIT`] or n > x.
pub fn jn_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = half * half;
    let mut sum = term;
    for k in 1..MAX_TERMS {
        term *= -q / (k as f64 * (k as u32 + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && k as f64 > half {
            break;
        }
    }
    sum
}

fn y0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        // (-1)^{k+1} H_k q^k / (k!)^2, with `term` carrying (-1)^k
        let contrib = -term * harmonic;
        sum += contrib;
        if contrib.abs() <= 1e-17 * sum.abs().max(1e-300) && kf > 0.5 * x {
            break;
        }
    }
    FRAC_2_PI * ((0.5 * x).ln() + EULER_GAMMA) * jn_series(0, x) + FRAC_2_PI * sum
}

fn y1_series(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    // psi(k+1) + psi(k+2) starting at k = 0: -2γ + 1
    let mut psi_a = -EULER_GAMMA;
    let mut psi_b = 1.0 - EULER_GAMMA;
    let mut term = 1.0; // (-q)^k / (k! (k+1)!)
    let mut sum = 0.0;
    for k in 0..MAX_TERMS {
        let contrib = (psi_a + psi_b) * term;
        sum += contrib;
        if contrib.abs() <= 1e-17 * sum.abs().max(1e-300) && k as f64 > half {
            break;
        }
        let kf = k as f64;
        psi_a += 1.0 / (kf + 1.0);
        psi_b += 1.0 / (kf + 2.0);
        term *= -q / ((kf + 1.0) * (kf + 2.0));
    }
    -2.0 / (PI * x) + FRAC_2_PI * half.ln() * jn_series(1, x) - half * sum / PI
}

/// Hankel's asymptotic expansion, returns (J_ν, Y_ν) for ν ∈ {0, 1}.
fn hankel_asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() > prev || a.abs() < 1e-18 {
            break;
        }
        prev = a.abs();
        // sign pattern: Q gets +a1, -a3, +a5...; P gets -a2, +a4, ...
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
    }
    let chi = x - (0.5 * nu as f64 + 0.25) * PI;
    let amp = (FRAC_2_PI / x).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

pub fn j0(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        jn_series(0, x)
    } else {
        hankel_asymptotic(0, x).0
    }
}

pub fn j1(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        jn_series(1, x)
    } else {
        hankel_asymptotic(1, x).0
    }
}

pub fn y0(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < SERIES_LIMIT {
        y0_series(x)
    } else {
        hankel_asymptotic(0, x).1
    }
}

pub fn y1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < SERIES_LIMIT {
        y1_series(x)
    } else {
        hankel_asymptotic(1, x).1
    }
}

/// Bessel function of the first kind J_n(x), x ≥ 0.
pub fn jn(n: u32, x: f64) -> f64 {
    match n {
        0 => j0(x),
        1 => j1(x),
        _ if x < SERIES_LIMIT => jn_series(n, x),
        _ if n as f64 > x => jn_miller(n, x),
        _ => {
            // forward recurrence is stable while n < x
            let (mut prev, mut cur) = (j0(x), j1(x));
            for k in 1..n {
                let next = 2.0 * k as f64 / x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Miller's backward recurrence, normalised with J_0 + 2 Σ J_2k = 1.
fn jn_miller(n: u32, x: f64) -> f64 {
    let start = 2 * ((n.max(x as u32) + 20 + (x.sqrt() * 6.0) as u32) / 2);
    let (mut next, mut cur) = (0.0, 1e-30);
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k - 1 == n {
            wanted = cur;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// Bessel function of the second kind Y_n(x), x > 0.
pub fn yn(n: u32, x: f64) -> f64 {
    match n {
        0 => y0(x),
        1 => y1(x),
        _ => {
            let (mut prev, mut cur) = (y0(x), y1(x));
            for k in 1..n {
                let next = 2.0 * k as f64 / x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Hankel function of the first kind H_n^(1)(x) = J_n(x) + i Y_n(x).
pub fn hankel1(n: u32, x: f64) -> Complex64 {
    Complex64::new(jn(n, x), yn(n, x))
}

/// d/dx J_n(x).
pub fn jn_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -j1(x)
    } else {
        jn(n - 1, x) - n as f64 / x * jn(n, x)
    }
}

/// d/dx H_n^(1)(x).
pub fn hankel1_prime(n: u32, x: f64) -> Complex64 {
    if n == 0 {
        -hankel1(1, x)
    } else {
        hankel1(n - 1, x) - hankel1(n, x) * (n as f64 / x)
    }
}

/// Large-argument leading behaviour of H_0^(1), used only for sanity checks.
pub fn hankel1_leading(x: f64) -> Complex64 {
    Complex64::from_polar((FRAC_2_PI / x).sqrt(), x - FRAC_PI_4)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent double-precision library.
    const TABLE: [(f64, f64, f64, f64, f64); 6] = [
        (
            1.0,
            0.7651976865579665,
            0.08825696421567697,
            0.44005058574493355,
            -0.7812128213002888,
        ),
        (
            0.5,
            0.938469807240813,
            -0.4445187335067066,
            0.24226845767487387,
            -1.4714723926702433,
        ),
        (
            3.0,
            -0.2600519549019335,
            0.3768500100127906,
            0.33905895852593654,
            0.3246744247918001,
        ),
        (
            14.0,
            0.17107347611045878,
            0.12719256858218356,
            0.13337515469879344,
            -0.16664484185617212,
        ),
        (
            25.0,
            0.09626678327595801,
            -0.12724943226800625,
            -0.1253502495802898,
            -0.09882996478323755,
        ),
        (
            60.0,
            -0.09147180408906201,
            0.047358952209449155,
            0.046598383758166224,
            0.09186960936986693,
        ),
    ];

    #[test]
    fn matches_reference_table() {
        for &(x, rj0, ry0, rj1, ry1) in &TABLE {
            assert!((j0(x) - rj0).abs() < 1e-12, "j0({x})");
            assert!((y0(x) - ry0).abs() < 1e-12, "y0({x})");
            assert!((j1(x) - rj1).abs() < 1e-12, "j1({x})");
            assert!((y1(x) - ry1).abs() < 1e-12, "y1({x})");
        }
    }

    #[test]
    fn higher_orders_match_reference() {
        assert!((jn(5, 2.5) - 0.01950162513450322).abs() < 1e-14);
        assert!((yn(5, 2.5) + 3.830176000740753).abs() < 1e-11);
        assert!((jn(3, 20.0) + 0.09890139456044958).abs() < 1e-12);
        assert!((jn(30, 20.0) - 1.240153636035431e-4).abs() < 1e-16);
        assert!((yn(3, 20.0) - 0.14967326271339415).abs() < 1e-12);
    }

    #[test]
    fn branches_agree_at_seam() {
        for x in [SERIES_LIMIT - 1e-9, SERIES_LIMIT, SERIES_LIMIT + 0.5] {
            let (aj0, ay0) = hankel_asymptotic(0, x);
            let (aj1, ay1) = hankel_asymptotic(1, x);
            assert!((aj0 - jn_series(0, x)).abs() < 1e-10);
            assert!((aj1 - jn_series(1, x)).abs() < 1e-10);
            assert!((ay0 - y0_series(x)).abs() < 1e-10);
            assert!((ay1 - y1_series(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_sum_identity() {
        // J0^2 + 2 Σ J_n^2 = 1
        for x in [0.1, 0.9, 2.0, 7.5, 13.0, 18.0, 40.0] {
            let mut s = j0(x).powi(2);
            for n in 1..120 {
                s += 2.0 * jn(n, x).powi(2);
            }
            assert!((s - 1.0).abs() < 1e-12, "x = {x}: {s}");
        }
    }

    #[test]
    fn wronskian() {
        for x in [0.05, 0.7, 3.3, 9.0, 15.0, 33.0] {
            for n in 0..6 {
                let w = jn(n + 1, x) * yn(n, x) - jn(n, x) * yn(n + 1, x);
                let expected = 2.0 / (PI * x);
                assert!(
                    (w - expected).abs() < 1e-11 * expected.max(1.0),
                    "n={n} x={x}"
                );
            }
        }
    }

    #[test]
    fn hankel_at_one() {
        let g = Complex64::new(0.0, 0.25) * hankel1(0, 1.0);
        assert!((g.re + 0.022064241053919).abs() < 1e-12);
        assert!((g.im - 0.191299421639492).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        for n in 0..4 {
            for x in [0.6, 2.2, 17.0] {
                let fd = (jn(n, x + h) - jn(n, x - h)) / (2.0 * h);
                assert!((fd - jn_prime(n, x)).abs() < 1e-8);
                let fdh = (hankel1(n, x + h) - hankel1(n, x - h)) / (2.0 * h);
                assert!((fdh - hankel1_prime(n, x)).norm() < 1e-6 * (1.0 + fdh.norm()));
            }
        }
    }

    #[test]
    fn approaches_leading_asymptote() {
        let x = 400.0;
        assert!((hankel1(0, x) - hankel1_leading(x)).norm() < 1e-3 * hankel1_leading(x).norm());
    }
}
