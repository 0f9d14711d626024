//! Front end for the ECP test: space files, test runs, region scans,
//! boundary bisection and curve sampling.

pub mod commands;
pub mod specfile;

pub use specfile::{SpaceSpec, SpecError};
