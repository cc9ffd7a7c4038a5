//! Construction and numerical verification of multi-bubble approximate
//! solutions of the critical system −Δuᵢ = uᵢ³ + Σ_{j≠i} βᵢⱼuᵢuⱼ² in R⁴.
//!
//! Modules, bottom-up: [`geometry`] (points, symmetries, bubble centers),
//! [`bubbles`] (closed-form fields and error terms), [`quadrature`] (adaptive
//! integration over R⁴), [`reduction`] (reduced-equation coefficients and
//! δ selection), [`solver`] (Galerkin spectra and fixed point), [`cli`]
//! (report emission).

pub mod bubbles;
pub mod cli;
pub mod error;
pub mod field;
pub mod geometry;
pub mod quadrature;
pub mod reduction;
pub mod solver;

pub use error::{Error, Result};
