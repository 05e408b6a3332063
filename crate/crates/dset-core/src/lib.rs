//! Bayesian inference under set constraints via smooth distance-to-set priors.
//!
//! The crate composes differentiable unnormalized log-posteriors with squared
//! distance-to-set penalties and provides the machinery to work with the
//! resulting relaxed posteriors:
//!
//! - [`sets`]: constraint sets represented through their Euclidean projection
//!   operators, with the squared-distance gradient built on top.
//! - [`qp`]: a dual active-set solver for projection-form quadratic programs,
//!   used for polyhedral and stochastic-dominance constraint sets.
//! - [`posterior`]: relaxed posteriors (squared, unsquared, level-set and
//!   sharp penalty flavors) over a small family of model targets.
//! - [`hmc`]: Hamiltonian Monte Carlo with leapfrog integration and
//!   dual-averaging step-size adaptation.
//! - [`mm`]: the proximal-distance majorization-minimization optimizer for
//!   MAP estimates, with an increasing-penalty schedule variant.
//! - [`tilting`]: calibration of the penalty strength from an expected
//!   squared-distance budget via exponential tilting of reference draws.
//! - [`diagnostics`]: chain summaries (ESS, autocorrelations, quantiles) and
//!   grid-density oracles for desk-scale verification.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded use. Float math falls back to `libm` in that
//! configuration.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod hmc;
mod linalg;
pub mod mm;
pub mod posterior;
pub mod qp;
pub mod rng;
pub mod sets;
pub mod tilting;

pub use error::{Error, Result};
pub use linalg::Matrix;
