//! Pseudospectral laboratory for the coupled Boussinesq / Klein-Gordon (KGB)
//! system
//!
//! ```text
//! u_tt = u_xx + u_ttxx + (u² + 2uv + v²)_xx
//! v_tt = v_xx − 2v − (u² + 2uv + v²)
//! ```
//!
//! its long-wave (Whitham) limit, and the normal-form machinery that turns the
//! error equations into a system with an almost conserved energy.
//!
//! Module map:
//! - [`dispersion`] — linear frequencies and non-resonance gaps.
//! - [`spectral`] — periodic grids, transforms, norms, two-argument kernels.
//! - [`whitham`] — slow amplitude equations, improved ansatz, residuals.
//! - [`kgb`] — integrating-factor RK4 for the full system.
//! - [`normalform`] — kernel recursion, Neumann inversion, composite maps.
//! - [`energy`] — Sobolev and modified energies, drift statistics.
//! - [`harness`] — experiment presets, ε-ladders, slope fits, persistence.

pub mod dispersion;
pub mod energy;
pub mod error;
pub mod harness;
pub mod kgb;
pub mod normalform;
pub mod spectral;
pub mod whitham;

pub use error::{LabError, Result};
