//! Nonlinear depolarization (NLDP) of a weak probe co-propagating with
//! unpolarized loading light in long repeatered fiber links.

// negated comparisons are used on purpose: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod field;
pub mod harness;
pub mod link;
pub mod oracle;
pub mod polarimeter;
pub mod polarization;
pub mod rng;
pub mod ssfm;
pub mod units;

pub use error::{NldpError, Result};
