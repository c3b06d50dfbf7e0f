//! Shift-share instrument construction and IV estimation for regional
//! panels, plus a synthetic data generator with known ground truth.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`panel`] loads and validates the input files (employment panel,
//!    export series, world-export shifters, destination data) and builds
//!    estimation samples with controls;
//! 2. [`instrument`] turns lagged employment shares and external shifters
//!    into shift-share instruments (baseline, destination-GDP, and
//!    long-difference kinds);
//! 3. [`regress`] estimates instrumented local projections and long
//!    differences with cluster-robust inference;
//! 4. [`dgp`] generates synthetic economies from a gravity trade model so
//!    every estimator can be checked against a known answer.
//!
//! Numerical conventions shared across modules: growth is measured in log
//! differences, standard errors default to CR1 cluster-robust, and every
//! map is ordered so identical inputs produce identical outputs.

pub mod dgp;
pub mod error;
pub mod instrument;
pub mod io;
pub mod panel;
pub mod pipeline;
pub mod regress;
pub mod taxonomy;

pub use error::{Error, ErrorClass, Result};
