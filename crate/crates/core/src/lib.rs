//! Estimator-efficiency metrics and the simulation machinery used to study them.
//!
//! The crate covers the whole numerical pipeline of a planned-missingness
//! Monte Carlo study:
//!
//! - [`metrics`]: quartiles, IQR overlap, relative bias, variance-based relative
//!   efficiency (RE) and the bias-adjusted IQR-overlap efficiency (BRE).
//! - [`lgm`]: a bivariate second-order latent growth model (two constructs,
//!   five waves, three indicators per construct-wave), its implied moments, and
//!   multivariate normal data generation.
//! - [`design`]: planned wave-missingness designs (SWMD-6 and custom masks).
//! - [`fiml`]: full-information maximum likelihood fitting of the growth model
//!   to incomplete data.
//! - [`sim`]: per-replication orchestration, counter-based random streams and
//!   per-condition pooling of estimates into metric reports.
//!
//! Everything here is `no_std` with `alloc`; file formats, the command line and
//! the thread pool live in the `bre-sim` crate.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod design;
mod error;
pub mod fiml;
pub mod lgm;
pub mod linalg;
pub mod metrics;
pub mod sim;

pub use error::{Error, Result};
