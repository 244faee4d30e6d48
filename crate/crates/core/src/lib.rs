//! Scattering matrices, resonance points and spectral flow for
//! finite-dimensional self-adjoint pairs `H₀`, `H₁ = H₀ + F*JF`.
//!
//! The crate computes, for an energy `λ` outside `spec(H₀)`:
//!
//! * the sandwiched resolvent `T_z = F(H₀ − z)⁻¹F*` and the stationary
//!   scattering matrix `S(z, s)` ([`resolvent`], [`scattering`]);
//! * real resonance points in a coupling window, their groups after moving
//!   `λ` off the axis, and the resonance index ([`resonance`]);
//! * the spectral flow invariants `μ`, `μ⁽ᵃ⁾`, `μ⁽ˢ⁾` of scattering matrix
//!   eigenvalues ([`flow`]) and contour windings in the coupling plane
//!   ([`contour`]);
//! * an end-to-end check that `−μ⁽ˢ⁾` equals the total resonance index
//!   ([`verify`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod contour;
pub mod error;
pub mod flow;
pub mod format;
pub mod model;
pub mod numerics;
pub mod resolvent;
pub mod resonance;
pub mod scattering;
pub mod track;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    lambda_grid, perturbed_operator, random_instance, validate_instance, CouplingWindow, Instance, SpectralParameter,
    ToleranceConfig, ValidatedInstance,
};
pub use numerics::{CMatrix, HermitianMatrix};
