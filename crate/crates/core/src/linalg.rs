//! Dense complex matrices, LU factorization with partial pivoting, and
//! power and Lanczos iterations for the largest singular value.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Systems with a 1-norm condition estimate above this are rejected as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Row count above which row-wise kernels fan out over the rayon pool.
const PARALLEL_ROWS: usize = 192;

/// Square or rectangular complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64 + Sync) -> Self {
        let mut data = vec![ZERO; rows * cols];
        data.par_chunks_mut(cols.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f(i, j);
                }
            });
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// y = A x.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        let dot = |row: &[Complex64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<Complex64>();
        if self.rows >= PARALLEL_ROWS {
            self.data.par_chunks(self.cols).map(dot).collect()
        } else {
            self.data.chunks(self.cols).map(dot).collect()
        }
    }

    /// y = Aᵀ x.
    pub fn matvec_transpose(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![ZERO; self.cols];
        for (row, xi) in self.data.chunks(self.cols).zip(x) {
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += a * xi;
            }
        }
        y
    }

    /// y = Aᴴ x.
    pub fn matvec_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let xc: Vec<_> = x.iter().map(|v| v.conj()).collect();
        self.matvec_transpose(&xc)
            .into_iter()
            .map(|v| v.conj())
            .collect()
    }

    /// Largest column absolute sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (s, a) in sums.iter_mut().zip(row) {
                *s += a.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Largest entrywise |A_ij − A_ji| relative to the largest |A_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        assert!(self.is_square());
        let scale = self
            .data
            .iter()
            .map(|a| a.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).norm());
            }
        }
        worst / scale
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// PA = LU factorization of a square matrix, keeping A for iterative refinement.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    original: CMatrix,
    condition: f64,
}

impl Lu {
    /// Factors `a` and estimates its 1-norm condition number.
    ///
    /// Returns [`Error::Singular`] when a pivot vanishes or the estimate exceeds
    /// [`MAX_CONDITION`].
    pub fn factor(a: &CMatrix) -> Result<Self> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        // pivot row as interleaved (re, im) and its rotation (−im, re), so
        // the row update is a real axpy pair that vectorizes
        let mut p1 = vec![0.0; 2 * n];
        let mut p2 = vec![0.0; 2 * n];
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[i * n + k].norm()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for (j, u) in lu[k * n + k + 1..(k + 1) * n].iter().enumerate() {
                p1[2 * j] = u.re;
                p1[2 * j + 1] = u.im;
                p2[2 * j] = -u.im;
                p2[2 * j + 1] = u.re;
            }
            let m = 2 * (n - k - 1);
            let (p1, p2) = (&p1[..m], &p2[..m]);
            let tail = &mut lu[(k + 1) * n..];
            let update = |row: &mut [Complex64]| {
                let l = row[k] / pivot;
                row[k] = l;
                if l != ZERO {
                    let r: &mut [f64] = bytemuck::cast_slice_mut(&mut row[k + 1..]);
                    for ((r, a), b) in r.iter_mut().zip(p1).zip(p2) {
                        *r -= l.re * a + l.im * b;
                    }
                }
            };
            if n - k > PARALLEL_ROWS {
                tail.par_chunks_mut(n).for_each(update);
            } else {
                tail.chunks_mut(n).for_each(update);
            }
        }
        let mut out = Self {
            n,
            lu,
            perm,
            original: a.clone(),
            condition: f64::NAN,
        };
        out.condition = a.norm_one() * out.inverse_norm_one_estimate();
        if !(out.condition <= MAX_CONDITION) {
            return Err(Error::Singular {
                condition: out.condition,
            });
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 1-norm condition estimate.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn solve_unrefined(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: Complex64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: Complex64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    fn solve_transpose_unrefined(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        // Uᵀ z = b
        let mut z = b.to_vec();
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            for j in i + 1..n {
                z[j] -= self.lu[i * n + j] * zi;
            }
        }
        // Lᵀ y = z
        for i in (0..n).rev() {
            let yi = z[i];
            for j in 0..i {
                z[j] -= self.lu[i * n + j] * yi;
            }
        }
        let mut x = vec![ZERO; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// Solves A x = b with one step of iterative refinement.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let mut x = self.solve_unrefined(b);
        let ax = self.original.matvec(&x);
        let r: Vec<_> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve_unrefined(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }

    /// Solves Aᵀ x = b with one step of iterative refinement.
    pub fn solve_transpose(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let mut x = self.solve_transpose_unrefined(b);
        let ax = self.original.matvec_transpose(&x);
        let r: Vec<_> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve_transpose_unrefined(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }

    /// Solves Aᴴ x = b.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let bc: Vec<_> = b.iter().map(|v| v.conj()).collect();
        self.solve_transpose(&bc)
            .into_iter()
            .map(|v| v.conj())
            .collect()
    }

    /// Hager–Higham estimate of ‖A⁻¹‖₁.
    fn inverse_norm_one_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut estimate = 0.0;
        for iter in 0..5 {
            let y = self.solve_unrefined(&x);
            let norm_y: f64 = y.iter().map(|v| v.norm()).sum();
            if iter > 0 && norm_y <= estimate {
                break;
            }
            estimate = norm_y;
            let xi: Vec<_> = y
                .iter()
                .map(|v| if v.norm() > 0.0 { v / v.norm() } else { ONE })
                .collect();
            // z = A^{-H} ξ
            let xc: Vec<_> = xi.iter().map(|v| v.conj()).collect();
            let z: Vec<_> = self
                .solve_transpose_unrefined(&xc)
                .into_iter()
                .map(|v| v.conj())
                .collect();
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![ZERO; n];
            x[jmax] = ONE;
        }
        if !estimate.is_finite() {
            return f64::INFINITY;
        }
        estimate
    }
}

/// Outcome of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularEstimate {
    pub value: f64,
    pub iterations: usize,
    /// ‖MᴴMx − σ²x‖ / σ² at the final iterate.
    pub residual: f64,
}

/// Largest singular value of a linear map by power iteration on MᴴM.
///
/// Stops once the relative change of the estimate drops below `tol`; the
/// start vector is drawn from a ChaCha stream seeded with `seed`.
pub fn largest_singular_value(
    dim: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    apply_adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SingularEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    normalize(&mut x);
    let mut sigma_sq = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mx = apply(&x);
        let mut w = apply_adjoint(&mx);
        let new_sigma_sq: f64 = mx.iter().map(|v| v.norm_sqr()).sum();
        if new_sigma_sq == 0.0 {
            return Ok(SingularEstimate {
                value: 0.0,
                iterations: it,
                residual: 0.0,
            });
        }
        residual = w
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b * new_sigma_sq).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / new_sigma_sq;
        let change = (new_sigma_sq - sigma_sq).abs() / new_sigma_sq;
        sigma_sq = new_sigma_sq;
        if it > 3 && change < tol {
            return Ok(SingularEstimate {
                value: sigma_sq.sqrt(),
                iterations: it,
                residual,
            });
        }
        normalize(&mut w);
        x = w;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        estimate: sigma_sq.sqrt(),
        gap: residual,
    })
}

/// Krylov block size before an explicit restart from the current Ritz vector.
const LANCZOS_BLOCK: usize = 120;

/// Largest singular value by Lanczos on MᴴM with full reorthogonalization.
///
/// Starts from the same seeded random vector as [`largest_singular_value`]
/// but converges in far fewer products when the top of the spectrum is
/// clustered. Stops once the Ritz residual `‖MᴴMy − θy‖/θ` and the change of
/// θ both fall below `tol`; `max_iter` caps the total number of products.
pub fn largest_singular_value_lanczos(
    dim: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    apply_adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SingularEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    normalize(&mut start);
    let op = |x: &[Complex64]| apply_adjoint(&apply(x));
    let block = LANCZOS_BLOCK.min(dim).max(1);
    let mut used = 0;
    let mut theta_prev = f64::NAN;
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    while used < max_iter {
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut ritz = loop {
            let q = basis.last().expect("nonempty basis");
            let mut w = op(q);
            used += 1;
            let a = dot_c(q, &w).re;
            alphas.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot_c(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= c * bi;
                    }
                }
            }
            let beta = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let k = alphas.len();
            let t = nalgebra::DMatrix::from_fn(k, k, |i, j| {
                if i == j {
                    alphas[i]
                } else if i + 1 == j {
                    betas[i]
                } else if j + 1 == i {
                    betas[j]
                } else {
                    0.0
                }
            });
            let eig = nalgebra::SymmetricEigen::new(t);
            let (imax, &tmax) =
                eig.eigenvalues
                    .iter()
                    .enumerate()
                    .fold(
                        (0, &f64::NEG_INFINITY),
                        |b, c| if c.1 > b.1 { c } else { b },
                    );
            theta = tmax;
            let y = eig.eigenvectors.column(imax);
            residual = if theta > 0.0 {
                beta * y[k - 1].abs() / theta
            } else {
                0.0
            };
            let change = ((theta - theta_prev) / theta).abs();
            theta_prev = theta;
            let exhausted = beta <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || k == dim;
            let done = theta == 0.0 || exhausted || (k > 3 && residual < tol && change < tol);
            if done || k == block || used >= max_iter {
                let mut ritz = vec![ZERO; dim];
                for (b, &yi) in basis.iter().zip(y.iter()) {
                    for (r, bi) in ritz.iter_mut().zip(b) {
                        *r += bi * yi;
                    }
                }
                if done {
                    return Ok(SingularEstimate {
                        value: theta.max(0.0).sqrt(),
                        iterations: used,
                        residual,
                    });
                }
                break ritz;
            }
            betas.push(beta);
            basis.push(w.into_iter().map(|v| v / beta).collect());
        };
        normalize(&mut ritz);
        start = ritz;
    }
    Err(Error::NotConverged {
        iterations: used,
        estimate: theta.max(0.0).sqrt(),
        gap: residual,
    })
}

fn dot_c(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(x: &mut [Complex64]) {
    let n = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}
