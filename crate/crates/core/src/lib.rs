//! Numerical test deciding whether a piecewise space built from
//! Extended Chebyshev section-spaces and lower triangular connection matrices
//! is an Extended Chebyshev Piecewise (ECP) space, and whether a space
//! containing constants is good for design.

// NaN must fail every positivity and range check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod design;
pub mod ecptest;
pub mod error;
pub mod families;
pub mod linalg;
pub mod pwspace;
pub mod scan;
pub mod sections;

pub use design::{global_bernstein_basis, BezierCurve, CurveSample, GlobalBernsteinBasis};
pub use ecptest::{
    build_global_basis, check_positivity, good_for_design, iterate_gamma, run_test, Diagnostics,
    FailureLocation, GammaTensor, GlobalCandidate, Stage, SystemFailure, TestConfig, TestOutcome,
    Verdict,
};
pub use error::{Error, Result};
pub use families::{builtin_families, Bindings, Family, ParamSpec};
pub use linalg::{is_reliable, solve, DenseMatrix, SolveReport};
pub use pwspace::{ConnectionMatrix, PWSpace, Partition, Side};
pub use scan::{bisect_boundary, scan, Axis, Bracket, Cell, CellOutcome, Evaluation, Mode, RegionMap};
pub use sections::{local_bernstein_basis, LocalBernsteinBasis, SectionKind, SectionSpace};
