//! Pseudospectral simulator and verification toolkit for the defocusing
//! quintic wave equation with energy-coefficient damping,
//!
//! `u_tt - Delta u + u^5 + E(t) u_t = 0`,   `u|_{boundary} = 0`,
//!
//! on rectangular boxes, where the damping coefficient `E(t)` is the
//! solution's own total energy. The crate provides:
//!
//! - [`domain`]: sine eigenbasis on boxes, fast transforms, norms,
//!   spectral Laplacian;
//! - [`multiplier`]: sharp and smooth spectral cutoffs and their
//!   measured operator properties;
//! - [`dynamics`]: Strang-split time integration with exact substeps,
//!   the single-mode oscillator variant, and closed-form decay bounds;
//! - [`diagnostics`]: energy-identity residuals, windowed dissipation
//!   analysis, decay-rate fits, spacetime norms, and the algebraic
//!   bootstrap helpers.

pub mod diagnostics;
pub mod domain;
pub mod dynamics;
mod error;
pub mod multiplier;
pub mod transform;

pub use error::{Error, Result};
