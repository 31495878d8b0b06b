//! Numerical toolkit for the Zeta distribution written as continuous mixtures
//! of Negative Binomial and Poisson counts.
//!
//! The crate covers the special functions and base distributions involved,
//! adaptive quadrature for the mixing integrals, every mixing density (proper
//! densities for `r >= 1`, signed quasi-densities for `0 < r < 1`, and the
//! Poisson rate density), a verification engine for the mixture identities,
//! and exact samplers for the direct and hierarchical constructions.

pub mod distributions;
pub mod error;
pub mod mixing;
pub mod mixture;
pub mod quadrature;
pub mod sampling;
pub mod special;

pub mod verification;

pub use error::{Error, Result};
