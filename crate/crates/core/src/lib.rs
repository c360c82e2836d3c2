//! Log-contrast regression on non-closed compositions with a multiplicative
//! total and moderator interactions: least-squares, Bayesian and
//! zero-inflated negative binomial fits, plus elasticity reports.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod compositions;
pub mod design;
pub mod error;
pub mod freq;
pub mod glm;
pub mod interpret;
pub mod io;
pub mod optim;
pub mod oracle;

pub use error::{Error, Result};
