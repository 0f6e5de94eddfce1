//! Pixelated circular design region, complex field storage and the
//! area-weighted inner product shared by every other module.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// In-plane scalar (`Te`, E along z) or in-plane vector (`Tm`, E in the xy-plane) fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    #[serde(rename = "TE")]
    Te,
    #[serde(rename = "TM")]
    Tm,
}

impl Polarization {
    /// Complex components stored per pixel.
    pub fn components(self) -> usize {
        match self {
            Polarization::Te => 1,
            Polarization::Tm => 2,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::Te => "TE",
            Polarization::Tm => "TM",
        })
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TE" => Ok(Polarization::Te),
            "TM" => Ok(Polarization::Tm),
            other => Err(Error::InvalidInput(format!(
                "unknown polarization `{other}`"
            ))),
        }
    }
}

/// Square-lattice discretization of a disc of radius `radius` centred at the origin.
///
/// Lattice sites sit at integer multiples of the spacing, so the origin is
/// always a pixel centre. A site belongs to the region iff its centre lies
/// strictly inside the disc.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    wavelength: f64,
    spacing: f64,
    radius: f64,
    sites: Vec<(i32, i32)>,
    centers: Vec<[f64; 2]>,
}

impl PixelGrid {
    pub fn new(wavelength: f64, radius: f64, spacing: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "region radius must be positive, got {radius}"
            )));
        }
        // A disc narrower than one cell holds no resolvable pixel.
        if radius < 0.5 * spacing {
            return Err(Error::EmptyRegion { radius, spacing });
        }
        let ratio = radius / spacing;
        // Boundary-touching sites are excluded: the tolerance keeps lattice
        // points at exactly |x| = R out despite rounding in R/δx.
        let limit = ratio * ratio * (1.0 - 1e-12);
        let reach = ratio.ceil() as i32;
        let mut sites = Vec::new();
        for j in -reach..=reach {
            for i in -reach..=reach {
                if ((i * i + j * j) as f64) < limit {
                    sites.push((i, j));
                }
            }
        }
        if sites.is_empty() {
            return Err(Error::EmptyRegion { radius, spacing });
        }
        let centers = sites
            .iter()
            .map(|&(i, j)| [i as f64 * spacing, j as f64 * spacing])
            .collect();
        Ok(Self {
            wavelength,
            spacing,
            radius,
            sites,
            centers,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Vacuum wavenumber k = 2π/λ0.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    pub fn n_pixels(&self) -> usize {
        self.centers.len()
    }

    /// Pixel centres in row-major order (y outer, x inner).
    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    /// Integer lattice coordinates matching [`Self::centers`].
    pub fn sites(&self) -> &[(i32, i32)] {
        &self.sites
    }

    /// Radius of the disc with the same area as the pixelated region.
    pub fn equivalent_radius(&self) -> f64 {
        (self.n_pixels() as f64 * self.cell_area() / PI).sqrt()
    }

    /// Radius of the disc with the area of a single cell.
    pub fn cell_disc_radius(&self) -> f64 {
        self.spacing / PI.sqrt()
    }
}

/// Complex field sampled on the pixels of a grid, `components()` values per pixel.
#[derive(Debug, Clone)]
pub struct FieldArray {
    polarization: Polarization,
    grid: Arc<PixelGrid>,
    values: Vec<Complex64>,
}

impl FieldArray {
    pub fn new(
        grid: Arc<PixelGrid>,
        polarization: Polarization,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = grid.n_pixels() * polarization.components();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some(bad) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite(format!("field entry {bad}")));
        }
        Ok(Self {
            polarization,
            grid,
            values,
        })
    }

    pub fn zeros(grid: Arc<PixelGrid>, polarization: Polarization) -> Self {
        let n = grid.n_pixels() * polarization.components();
        Self {
            polarization,
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Same layout as `self`, new values. Panics on a length mismatch.
    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "field length mismatch");
        Self {
            polarization: self.polarization,
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn grid(&self) -> &Arc<PixelGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Components of pixel `i`.
    pub fn pixel(&self, i: usize) -> &[Complex64] {
        let d = self.polarization.components();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn check_compatible(&self, other: &FieldArray) -> Result<()> {
        if self.polarization != other.polarization {
            return Err(Error::Incompatible("polarizations differ".into()));
        }
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::Incompatible("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.with_values(self.values.iter().map(|v| v * factor).collect())
    }

    pub fn add(&self, other: &FieldArray) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &FieldArray) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    /// ‖u‖ induced by [`inner`].
    pub fn norm(&self) -> f64 {
        (self.grid.cell_area() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }
}

pub(crate) fn same_grid(a: &Arc<PixelGrid>, b: &Arc<PixelGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Area-weighted inner product ⟨u, v⟩ = δA Σ conj(u_i) v_i.
pub fn inner(u: &FieldArray, v: &FieldArray) -> Result<Complex64> {
    u.check_compatible(v)?;
    Ok(inner_raw(u.values(), v.values()) * u.grid.cell_area())
}

/// Unweighted Σ conj(u_i) v_i.
pub(crate) fn inner_raw(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Real per-pixel permittivity contrast with box bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastMap {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl ContrastMap {
    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        if let Some(i) = values.iter().position(|&c| !(lower..=upper).contains(&c)) {
            return Err(Error::InvalidInput(format!(
                "contrast {} at pixel {i} outside [{lower}, {upper}]",
                values[i]
            )));
        }
        Ok(Self {
            values,
            lower,
            upper,
        })
    }

    pub fn uniform(n_pixels: usize, value: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![value; n_pixels], lower, upper)
    }

    /// Projects arbitrary values onto the box.
    pub fn clamped(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        check_bounds(lower, upper)?;
        let values = values.into_iter().map(|c| c.clamp(lower, upper)).collect();
        Ok(Self {
            values,
            lower,
            upper,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// χ̄ = (χ+ + χ−)/2.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }

    /// δχ = |χ+ − χ−|/2.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower).abs()
    }
}

pub(crate) fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower.is_finite() && upper.is_finite()) || lower > upper {
        return Err(Error::InvalidInput(format!(
            "invalid contrast bounds [{lower}, {upper}]"
        )));
    }
    Ok(())
}
