//! Dense complex operator core: matrix type with cached spectral data,
//! exchange formats, resolvent and eigenstructure, matrix exponential,
//! growth-bound certificates, ordered Schur projectors, fractional powers.

pub mod expm;
pub mod fractional;
pub mod io;
pub mod matrix;
pub mod schur;
pub mod semibound;
pub mod spectrum;

pub use expm::matrix_exp;
pub use fractional::fractional_power;
pub use io::{load_matrix, matrix_from_json, matrix_from_text, matrix_to_json, matrix_to_text};
pub use matrix::{operator_norm, spectral_norm, OperatorMatrix, SchurCache};
pub use schur::{ordered_schur, spectral_projector, OrderedSchur};
pub use semibound::{semigroup_bound, SemigroupBound};
pub use spectrum::{resolvent, spectrum, SpectrumResult};
