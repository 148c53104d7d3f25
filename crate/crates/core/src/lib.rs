//! Fourier-domain RAAR phase retrieval for oversampled diffraction patterns
//! recorded under quadratic phase-shift illumination.
//!
//! The crate is organized bottom-up:
//!
//! - [`field`]: grids, complex fields and the global-phase metrics
//! - [`operator`]: the isometric mask + zero-pad + DFT propagation operator
//! - [`projections`]: range and magnitude projections and their reflections
//! - [`solver`]: the RAAR iteration with its ER and HIO special cases
//! - [`spectral`]: the real linearization at a solution and its spectral gap
//! - [`noise`]: Poisson photon-count noise at a prescribed SNR
//! - [`io`]: phantoms, graymap files and CSV output
//! - [`cli`]: the experiment runner behind the `raar` binary

pub mod cli;
pub mod error;
pub mod field;
pub mod io;
pub mod noise;
pub mod operator;
pub mod projections;
pub mod solver;
pub mod spectral;

#[cfg(test)]
pub(crate) mod oracle;

pub use error::{Error, Result};
pub use field::{
    align_phase, distance, inner, relative_error, AlignMode, AlignmentResult, FieldKind,
    FourierField, GridShape, SpatialImage,
};
pub use operator::{make_mask, ConstraintKind, ForwardOperator, MaskSpec};
pub use projections::{project_magnitude, project_range, reflect, MagnitudeData, Projection};
pub use solver::{SolverConfig, SolverInit, SolverTrace, Termination, TraceRecord};
pub use spectral::{Linearization, RealPairField, SpectralReport};
