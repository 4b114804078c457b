//! Sample-based portfolio optimization with the entropic value-at-risk.

// `!(x > 0.0)` is used on purpose so that NaN fails the check; index loops
// read better than iterator chains in the dense linear algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod compare;
pub mod cvar;
pub mod error;
pub mod evar;
pub mod ipm;
pub mod model;
pub mod normal;
pub mod prices;
pub mod risk;
pub mod scenario;

pub use error::{Error, Result};
