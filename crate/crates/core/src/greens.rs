//! Pulse-basis, point-matched discretization of the 2D vacuum Green's
//! operator on a [`PixelGrid`], and incident plane waves.
//!
//! Every cell is replaced by the disc of equal area `a = δx/√π`. For a
//! source disc centred at `x'` and an observation point at distance
//! `ρ > a`, Graf's addition theorem gives
//!
//! ```text
//! ∫_disc (i/4) H0(k|x − x''|) dA'' = (i/4) (2πa/k) J1(ka) H0(kρ)
//! ```
//!
//! The scalar (TE) operator carries the k² factor, so a contrast χ enters
//! the integral equation as `E = E_inc + G (χ E)`. The vector (TM) operator
//! applies `(k² I + ∇∇)` to the same disc potential; at the centre of the
//! self-cell this evaluates to `(k²ψ(0) − 1)/2 · I`, which is the regular
//! part of the disc integral plus the 2D depolarization `−I/2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bessel::{hankel1, j1};
use crate::error::{Error, Result};
use crate::geometry::{same_grid, FieldArray, PixelGrid, Polarization};
use crate::linalg::CMatrix;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense discretized background Green's operator restricted to the grid.
#[derive(Debug, Clone)]
pub struct GreensOperator {
    polarization: Polarization,
    grid: Arc<PixelGrid>,
    matrix: CMatrix,
}

/// k² ∫_disc(a) (i/4) H0(kρ) dA for an observation point at the disc centre.
pub fn te_self_term(k: f64, a: f64) -> Complex64 {
    I * (0.5 * PI * k * a) * hankel1(1, k * a) - 1.0
}

/// Addition-theorem factor (2πa/k) J1(ka), the integral of J0(k|x|) over the disc.
fn disc_factor(k: f64, a: f64) -> f64 {
    2.0 * PI * a / k * j1(k * a)
}

/// TE coupling from a source cell at distance `rho` (k² included).
pub fn te_coupling(k: f64, a: f64, rho: f64) -> Complex64 {
    I * 0.25 * k * k * disc_factor(k, a) * hankel1(0, k * rho)
}

/// TM 2×2 coupling block for separation vector `r` (observation − source).
pub fn tm_coupling(k: f64, a: f64, r: [f64; 2]) -> [[Complex64; 2]; 2] {
    let rho = r[0].hypot(r[1]);
    let u = [r[0] / rho, r[1] / rho];
    let pref = I * 0.25 * disc_factor(k, a);
    let transverse = k * k * hankel1(0, k * rho);
    let near = k * hankel1(1, k * rho) / rho;
    let mut block = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (p, row) in block.iter_mut().enumerate() {
        for (q, v) in row.iter_mut().enumerate() {
            let delta = if p == q { 1.0 } else { 0.0 };
            let uu = u[p] * u[q];
            *v = pref * (transverse * (delta - uu) + near * (2.0 * uu - delta));
        }
    }
    block
}

impl GreensOperator {
    pub fn assemble(grid: Arc<PixelGrid>, polarization: Polarization) -> Self {
        match polarization {
            Polarization::Te => Self::assemble_te(grid),
            Polarization::Tm => Self::assemble_tm(grid),
        }
    }

    pub fn assemble_te(grid: Arc<PixelGrid>) -> Self {
        let k = grid.wavenumber();
        let a = grid.cell_disc_radius();
        let n = grid.n_pixels();
        let centers = grid.centers();
        let diag = te_self_term(k, a);
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag
            } else {
                let rho = (centers[i][0] - centers[j][0]).hypot(centers[i][1] - centers[j][1]);
                te_coupling(k, a, rho)
            }
        });
        Self {
            polarization: Polarization::Te,
            grid,
            matrix,
        }
    }

    pub fn assemble_tm(grid: Arc<PixelGrid>) -> Self {
        let k = grid.wavenumber();
        let a = grid.cell_disc_radius();
        let n = grid.n_pixels();
        let dim = 2 * n;
        let centers = grid.centers();
        let diag = 0.5 * (te_self_term(k, a) - 1.0);
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        // two matrix rows per observation pixel
        data.par_chunks_mut(2 * dim)
            .enumerate()
            .for_each(|(i, rows)| {
                let (row_x, row_y) = rows.split_at_mut(dim);
                for j in 0..n {
                    let block = if i == j {
                        [
                            [diag, Complex64::new(0.0, 0.0)],
                            [Complex64::new(0.0, 0.0), diag],
                        ]
                    } else {
                        tm_coupling(
                            k,
                            a,
                            [centers[i][0] - centers[j][0], centers[i][1] - centers[j][1]],
                        )
                    };
                    row_x[2 * j] = block[0][0];
                    row_x[2 * j + 1] = block[0][1];
                    row_y[2 * j] = block[1][0];
                    row_y[2 * j + 1] = block[1][1];
                }
            });
        Self {
            polarization: Polarization::Tm,
            grid,
            matrix: CMatrix::from_row_major(dim, dim, data),
        }
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn grid(&self) -> &Arc<PixelGrid> {
        &self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Number of complex unknowns, N·d.
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn check_field(&self, field: &FieldArray) -> Result<()> {
        if field.polarization() != self.polarization || !same_grid(field.grid(), &self.grid) {
            return Err(Error::Incompatible(
                "field does not match the operator".into(),
            ));
        }
        Ok(())
    }

    /// G Φ.
    pub fn apply(&self, field: &FieldArray) -> Result<FieldArray> {
        self.check_field(field)?;
        Ok(field.with_values(self.matrix.matvec(field.values())))
    }

    /// G† V, the adjoint under the area-weighted inner product (= Gᴴ).
    pub fn apply_adjoint(&self, field: &FieldArray) -> Result<FieldArray> {
        self.check_field(field)?;
        Ok(field.with_values(self.apply_adjoint_raw(field.values())))
    }

    /// Gᴴ v using the complex symmetry Gᴴ = conj(G).
    pub(crate) fn apply_adjoint_raw(&self, v: &[Complex64]) -> Vec<Complex64> {
        let vc: Vec<_> = v.iter().map(|x| x.conj()).collect();
        self.matrix
            .matvec(&vc)
            .into_iter()
            .map(|x| x.conj())
            .collect()
    }
}

/// Unit-amplitude plane wave propagating along `direction`.
///
/// TE fields are `e^{ik d·x}`; TM fields carry the in-plane polarization
/// vector `(−d_y, d_x)`. The direction is normalized; a zero vector is rejected.
pub fn plane_wave(
    grid: &Arc<PixelGrid>,
    polarization: Polarization,
    direction: [f64; 2],
) -> Result<FieldArray> {
    let len = direction[0].hypot(direction[1]);
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::InvalidInput(
            "plane-wave direction must be a nonzero vector".into(),
        ));
    }
    let d = [direction[0] / len, direction[1] / len];
    let k = grid.wavenumber();
    let mut values = Vec::with_capacity(grid.n_pixels() * polarization.components());
    for c in grid.centers() {
        let phase = Complex64::from_polar(1.0, k * (d[0] * c[0] + d[1] * c[1]));
        match polarization {
            Polarization::Te => values.push(phase),
            Polarization::Tm => {
                values.push(phase * -d[1]);
                values.push(phase * d[0]);
            }
        }
    }
    FieldArray::new(Arc::clone(grid), polarization, values)
}
