//! Numerical diagnostics for semigroup generators under the Yosida distance:
//! distance estimation on resolvent grids, perturbation-bound verification,
//! exponential-dichotomy detection with spectral projectors, solution-semigroup
//! generators for delay equations on Chebyshev meshes, and reaction-diffusion
//! model builders realizing structured perturbation families.

pub mod delay;
pub mod dichotomy;
pub mod error;
pub mod harness;
pub mod linops;
pub mod models;
pub mod yosida;

pub use error::{Error, Result};
