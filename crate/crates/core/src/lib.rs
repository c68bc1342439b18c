//! Degree bounds for parameters `c` at which two integer initial values are
//! both preperiodic under `z^2 + c`, via mutual energies of root clouds.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod critpoly;
pub mod dd;
pub mod energy;
pub mod mandel;
pub mod quad;
pub mod report;
pub mod rootsolve;
pub mod sum;
pub mod pipeline;
