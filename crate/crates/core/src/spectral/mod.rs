//! Discrete Fourier representation of real periodic fields on a cubic box.

mod fft;
mod field;
mod grid;
mod projection;
mod random;

pub use fft::{with_engine, Band, Fft3d};
pub use field::{
    dealias, dealias_in_place, gradient, sobolev_seminorm_sq, transform_forward, transform_inverse,
    SpectralField, VectorField, HERMITIAN_TOLERANCE,
};
pub(crate) use field::{forward_pair, inverse_pair};
pub use grid::Grid;
pub use projection::{leray_project, leray_project_in_place, max_divergence};
pub use random::{
    make_divfree_random_field, make_divfree_random_tensor, ProfileShape, SpectrumProfile,
};
