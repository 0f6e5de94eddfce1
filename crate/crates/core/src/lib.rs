//! Certified upper bounds on the scattering cross-section of lossless 2D
//! scatterers from a Lagrangian dual program, with the volume-integral
//! forward solver, adjoint local optimizer and cylinder-series reference
//! needed to evaluate and validate them.

pub mod alpha;
pub mod bessel;
pub mod designopt;
pub mod dual;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod greens;
pub mod linalg;
pub mod mie;

pub use error::{Error, Result};
pub use forward::{cross_section, reference_field, solve_vie, ScatterSolution};
pub use geometry::{inner, ContrastMap, FieldArray, PixelGrid, Polarization};
pub use greens::{plane_wave, GreensOperator};
pub use mie::{mie_cross_section, MieResult};
