//! Gaussian-approximation bounds for vectors of U-statistics of Poisson
//! point processes, validated by simulation.
//!
//! The library computes, for a vector `F = (F_1, ..., F_d)` of U-statistics
//! driven by a Poisson point process on a box, an explicit upper bound on
//! the smooth-test-function distance between the normalized vector
//! `sqrt(C Σ⁻¹) (F − E F)` and a Gaussian `N_d(0, C)`. The bound combines
//! chaos-kernel inner products, constrained-partition integrals, and
//! small-matrix norms. The same models can be simulated to produce an
//! empirical lower bound on the distance, so every report is checkable:
//! the theoretical bound must dominate the empirical discrepancy.
//!
//! Modules follow the pipeline:
//!
//! - [`model`]: ground spaces, intensity measures, kernel vectors, built-ins
//! - [`quadrature`]: tensor / Monte Carlo integration over `E^n` with
//!   standard errors and deterministic parallel reduction
//! - [`partitions`]: constrained set partitions and the variable wiring of
//!   the replacement operator
//! - [`chaos`]: chaos kernels, covariance, moment formulas, difference
//!   operators
//! - [`linalg`]: dense `d×d` eigendecompositions, PD square roots, norms
//! - [`bounds`]: the partition-sum M-terms and the assembled bound
//! - [`simulate`]: Poisson sampling, U-statistic evaluation, replication
//! - [`distance`]: empirical distance lower bounds and moment diagnostics
//! - [`cli`]: config parsing and the `bound` / `verify` / `sweep` /
//!   `selftest` pipelines behind the command-line tool

pub mod bounds;
pub mod chaos;
pub mod cli;
pub mod distance;
pub mod error;
pub mod linalg;
pub mod model;
pub mod partitions;
pub mod quadrature;
pub mod seeds;
pub mod simulate;

pub use error::{Error, Result};
