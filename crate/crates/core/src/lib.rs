//! Throughput analysis of two-tier downlink networks in which UAV base
//! stations follow a Matérn type-II hardcore process and terrestrial base
//! stations a Poisson process.
//!
//! The crate provides the analytical side (MISR gain, Laplace-functional
//! rate approximations, area spectral efficiency), a Monte Carlo simulator
//! of the same network, and the altitude/power-control optimizer built on
//! top of the analytical rates.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod exec;
pub mod geometry;
pub mod numerics;
pub mod optimizer;
pub mod simulation;

/// Conversion factor from "per km²" to "per m²".
pub const PER_KM2: f64 = 1e-6;

/// Transmit power in watts from dBm.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}
