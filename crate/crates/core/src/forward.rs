//! Volume-integral-equation solves `(I − G diag(χ)) E = E_inc`, the
//! cross-section functional and operator norms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{inner, same_grid, ContrastMap, FieldArray};
use crate::greens::GreensOperator;
use crate::linalg::{largest_singular_value_lanczos, CMatrix, Lu, SingularEstimate};

/// Relative residual every accepted solve must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Iteration controls for [`operator_norm`].
pub const NORM_TOL: f64 = 1e-10;
pub const NORM_MAX_ITER: usize = 20_000;

/// Result of one forward solve.
#[derive(Debug, Clone)]
pub struct ScatterSolution {
    /// Total field E on the design region.
    pub field: FieldArray,
    /// Polarization current Φ = χE.
    pub current: FieldArray,
    /// `2 Im⟨E_inc, Φ⟩`; see [`cross_section`] for the physical scale.
    pub cross_section: f64,
    /// ‖(I − G diag(χ))E − E_inc‖ / ‖E_inc‖.
    pub residual: f64,
}

/// Physical cross-section per unit of [`cross_section`], i.e. `k/2`.
///
/// With the area-weighted inner product and a unit plane wave, the functional
/// `2 Im⟨E_inc, Φ⟩` equals `2/k` times the 2D scattering width.
pub fn cross_section_scale(wavenumber: f64) -> f64 {
    0.5 * wavenumber
}

/// Raw cross-section functional `2 Im⟨E_inc, Φ⟩`.
pub fn cross_section(incident: &FieldArray, current: &FieldArray) -> Result<f64> {
    Ok(2.0 * inner(incident, current)?.im)
}

/// Expands per-pixel contrasts to one entry per unknown.
pub(crate) fn expand_contrast(values: &[f64], components: usize) -> Vec<f64> {
    values
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, components))
        .collect()
}

fn check_operands(g: &GreensOperator, incident: &FieldArray) -> Result<()> {
    if incident.polarization() != g.polarization() || !same_grid(incident.grid(), g.grid()) {
        return Err(Error::Incompatible(
            "incident field does not match the operator".into(),
        ));
    }
    Ok(())
}

/// Dense `I − G diag(d)` for a per-unknown diagonal `d`.
pub(crate) fn system_matrix(g: &GreensOperator, diag: &[f64]) -> CMatrix {
    let m = g.matrix();
    let n = g.dim();
    CMatrix::from_fn(n, n, |i, j| {
        let v = -m[(i, j)] * diag[j];
        if i == j {
            v + 1.0
        } else {
            v
        }
    })
}

/// Factorized VIE system for a fixed contrast, reusable for adjoint solves.
#[derive(Debug, Clone)]
pub struct VieSystem {
    lu: Lu,
    diag: Vec<f64>,
}

impl VieSystem {
    pub fn new(g: &GreensOperator, chi: &ContrastMap) -> Result<Self> {
        let n = g.grid().n_pixels();
        if chi.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: chi.len(),
            });
        }
        let diag = expand_contrast(chi.values(), g.polarization().components());
        let lu = Lu::factor(&system_matrix(g, &diag))?;
        Ok(Self { lu, diag })
    }

    pub fn lu(&self) -> &Lu {
        &self.lu
    }

    /// Per-unknown contrast.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

fn relative_residual(g: &GreensOperator, diag: &[f64], e: &[Complex64], b: &[Complex64]) -> f64 {
    let phi: Vec<_> = e.iter().zip(diag).map(|(v, c)| v * c).collect();
    let gphi = g.matrix().matvec(&phi);
    let num: f64 = e
        .iter()
        .zip(&gphi)
        .zip(b)
        .map(|((ei, gi), bi)| (ei - gi - bi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Solves the VIE with an already factorized system.
pub fn solve_with(
    g: &GreensOperator,
    system: &VieSystem,
    incident: &FieldArray,
) -> Result<ScatterSolution> {
    check_operands(g, incident)?;
    let b = incident.values();
    let e = system.lu.solve(b);
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward solve".into()));
    }
    let residual = relative_residual(g, &system.diag, &e, b);
    if residual > RESIDUAL_TOL {
        return Err(Error::Singular {
            condition: system.lu.condition(),
        });
    }
    let phi: Vec<_> = e.iter().zip(&system.diag).map(|(v, c)| v * c).collect();
    let field = incident.with_values(e);
    let current = incident.with_values(phi);
    let cross_section = cross_section(incident, &current)?;
    Ok(ScatterSolution {
        field,
        current,
        cross_section,
        residual,
    })
}

/// Solves `E = E_inc + G(χE)` by dense LU with one refinement step.
///
/// A system whose condition estimate exceeds 1e14, or whose refined residual
/// misses [`RESIDUAL_TOL`], is reported as [`Error::Singular`].
pub fn solve_vie(
    g: &GreensOperator,
    chi: &ContrastMap,
    incident: &FieldArray,
) -> Result<ScatterSolution> {
    check_operands(g, incident)?;
    let system = VieSystem::new(g, chi)?;
    solve_with(g, &system, incident)
}

/// Uniform-contrast solve `(I − χ̄G)⁻¹ E_inc`.
pub fn reference_field(
    g: &GreensOperator,
    chi_bar: f64,
    incident: &FieldArray,
) -> Result<FieldArray> {
    let n = g.grid().n_pixels();
    let chi = ContrastMap::uniform(n, chi_bar, chi_bar, chi_bar)?;
    Ok(solve_vie(g, &chi, incident)?.field)
}

/// Largest singular value of a square linear map given by its action and adjoint action.
///
/// The area weight of the inner product is uniform, so the induced norm is
/// the plain spectral norm of the matrix.
pub fn operator_norm(
    dim: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    apply_adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>,
    seed: u64,
) -> Result<SingularEstimate> {
    largest_singular_value_lanczos(dim, apply, apply_adjoint, NORM_TOL, NORM_MAX_ITER, seed)
}
