//! Iterates of positive linear operators on C[0,1], their limits, and
//! pointwise estimates of the convergence error in terms of moduli of smoothness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod gridfn;
pub mod iterate;
pub mod operators;
pub mod smoothness;

pub use bounds::{verify, Analysis, BoundReport, Estimate, VerifyConfig};
pub use error::{Error, Result};
pub use gridfn::{FunctionSpec, GridFunction};
pub use iterate::{converge_limit, LimitInfo, LimitKind};
pub use operators::{OperatorSpec, SamplingOperator, SignClass, SignTag};
