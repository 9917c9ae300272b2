//! Learnability-driven subset selection for budgeted active learning over
//! roadside scene pools.
//!
//! Selection runs in up to three stages, each maximizing a concave-over-
//! modular objective greedily: depth confidence, then semantic balance,
//! then geometric variation. [`simulator`] supplies synthetic pools with a
//! detector that improves as scenes are labeled.

// NaN-rejecting guards are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod error;
pub mod io;
pub mod objectives;
pub mod scene;
pub mod selector;
pub mod simulator;
pub mod submodular;

pub use error::{Error, Result};
