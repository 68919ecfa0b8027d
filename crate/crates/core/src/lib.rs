// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod normal;
pub mod potentials;
pub mod scenarios;
pub mod soft;
pub mod solver;
pub mod validation;

pub use error::{Error, Result};
