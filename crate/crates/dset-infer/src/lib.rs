//! Experiment harness for constrained Bayesian inference with
//! distance-to-set priors: declarative configs in, chain CSVs, quantile
//! tables and SVG plots out.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod io;
pub mod report;
pub mod svg;
