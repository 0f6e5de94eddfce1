//! Cell enumeration, per-cell problem setup and the ordered work pool.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use scatbound_core::alpha::{alpha_ub, AlphaResult};
use scatbound_core::{
    plane_wave, reference_field, Error, FieldArray, GreensOperator, PixelGrid, Polarization,
};

use crate::config::{contrast_bounds, SweepConfig};

/// Incident plane wave direction used by every command and by `verify`.
pub const INCIDENCE: [f64; 2] = [1.0, 0.0];

/// One (polarization, R, χ0) cell; `index` is its position in output order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub polarization: Polarization,
    pub radius_index: usize,
    pub radius: f64,
    pub contrast_index: usize,
    pub chi0: f64,
}

impl Cell {
    pub fn bounds(&self) -> (f64, f64) {
        contrast_bounds(self.chi0)
    }

    /// File stem shared by every artifact of this cell.
    pub fn stem(&self) -> String {
        format!(
            "{}_r{}_c{:02}",
            self.polarization, self.radius_index, self.contrast_index
        )
    }
}

/// Cells in output order: polarization, then radius, then χ0.
pub fn cells(config: &SweepConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &polarization in &config.polarizations {
        for (radius_index, &radius) in config.radii.iter().enumerate() {
            for (contrast_index, &chi0) in config.contrasts.iter().enumerate() {
                out.push(Cell {
                    index: out.len(),
                    polarization,
                    radius_index,
                    radius,
                    contrast_index,
                    chi0,
                });
            }
        }
    }
    out
}

/// Independent per-cell seed (splitmix64 of the base seed and cell index).
pub fn cell_seed(base: u64, index: usize) -> u64 {
    let mut z = base
        ^ (index as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Operator and incident field of one cell.
pub struct CellProblem {
    pub g: GreensOperator,
    pub incident: FieldArray,
    pub lower: f64,
    pub upper: f64,
}

impl CellProblem {
    pub fn build(
        wavelength: f64,
        spacing: f64,
        polarization: Polarization,
        radius: f64,
        lower: f64,
        upper: f64,
    ) -> scatbound_core::Result<Self> {
        let grid = Arc::new(PixelGrid::new(wavelength, radius, spacing)?);
        let g = GreensOperator::assemble(Arc::clone(&grid), polarization);
        let incident = plane_wave(&grid, polarization, INCIDENCE)?;
        Ok(Self {
            g,
            incident,
            lower,
            upper,
        })
    }

    pub fn for_cell(config: &SweepConfig, cell: &Cell) -> scatbound_core::Result<Self> {
        let (lo, hi) = cell.bounds();
        Self::build(
            config.wavelength,
            config.spacing,
            cell.polarization,
            cell.radius,
            lo,
            hi,
        )
    }

    pub fn n_pixels(&self) -> usize {
        self.g.grid().n_pixels()
    }

    pub fn chi_bar(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn reference(&self) -> scatbound_core::Result<FieldArray> {
        reference_field(&self.g, self.chi_bar(), &self.incident)
    }

    /// α_ub, with a singular reference system reported as divergent.
    pub fn alpha_ub(&self) -> scatbound_core::Result<(AlphaResult, Option<String>)> {
        match alpha_ub(&self.g, self.lower, self.upper) {
            Ok(r) => Ok((r, None)),
            Err(Error::Singular { condition }) => Ok((
                AlphaResult {
                    alpha: f64::INFINITY,
                    divergent: true,
                    operator_norm: None,
                    distribution: Vec::new(),
                    maps: Vec::new(),
                    failed: 0,
                },
                Some(format!(
                    "reference system singular (condition {condition:.3e})"
                )),
            )),
            Err(e) => Err(e),
        }
    }
}

/// Runs `work` on every cell in the pool and returns results with wall
/// seconds, in cell order regardless of completion order.
pub fn run_cells<T: Send>(cells: &[Cell], work: impl Fn(&Cell) -> T + Sync) -> Vec<(T, f64)> {
    cells
        .par_iter()
        .map(|c| {
            let t = Instant::now();
            let out = work(c);
            (out, t.elapsed().as_secs_f64())
        })
        .collect()
}
