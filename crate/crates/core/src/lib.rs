//! Numerical checks of necessary optimality conditions for infinite-horizon
//! optimal control problems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod error;
pub mod ode;
pub mod overtaking;
pub mod par;
pub mod problem;
pub mod reference;
pub mod variational;
pub mod verdict;

pub use error::{Error, Result};
pub use par::Exec;
pub use verdict::{ConditionVerdict, Status};
