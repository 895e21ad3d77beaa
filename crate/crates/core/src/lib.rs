//! Solvers and convergence harness for the one-dimensional nonlinear Dirac
//! equation in the nonrelativistic limit regime.

pub mod cli;
pub mod cnfd;
pub mod cyclic;
pub mod dirac_model;
pub mod error;
pub mod harness;
pub mod ewi_fp;
pub mod linalg;
pub mod observables;
pub mod spectral_grid;
pub mod tsfp;

pub use error::{Error, Result};
