//! Internal convex-QP machinery shared by the epigraph and MIP solvers.
//!
//! Problems take the form
//!
//! ```text
//! minimize   (1/2) x' P x + q' x
//! subject to l <= A x <= u
//! ```
//!
//! and are solved by operator splitting (ADMM) with a banded LDL'
//! factorization of the KKT system. Both builders lay variables and
//! constraints out per time step, so an interleaved ordering keeps the KKT
//! matrix inside a narrow band and factorization linear in the horizon.

pub(crate) mod admm;
pub(crate) mod banded;
pub(crate) mod qp;

pub(crate) use admm::{AdmmSolver, SolveOptions};
pub(crate) use qp::QpData;
