//! Penalized variational solver and verification harness for the
//! semiclassical fractional Schrödinger equation
//!
//! ```text
//! ε^{2s} (-Δ)^s u + V(x) u = |u|^{p-2} u   in R^N
//! ```
//!
//! with potentials that may decay fast or vanish outside a compact set.

pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod fracops;
pub mod grid;
pub mod io;
pub mod model;
pub mod quad;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
