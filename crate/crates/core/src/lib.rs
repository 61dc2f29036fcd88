//! Pseudo-spectral simulator and decay-analysis toolkit for the
//! incompressible Oldroyd model with deformation-tensor damping,
//!
//! ```text
//! ∂t u − μΔu + u·∇u + ∇p = Σ_k F·k·∇F·k,   div u = 0,
//! ∂t F·j + νF·j + u·∇F·j = F·j·∇u,         div Fᵀ = 0,
//! ```
//!
//! on a periodic box.

pub mod decay;
pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod io;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
