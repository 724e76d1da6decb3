//! Arithmetic statistics of the groups of rational points of elliptic curves
//! over prime fields: subgroup counts, exhaustive curve enumeration, local
//! densities, main-term evaluation and a divisor-sum experiment.

pub mod arith;
pub mod curves;
pub mod densities;
pub mod divisor_ap;
pub mod error;
pub mod groups;
pub mod sweep;
pub mod theorem;

pub use error::{Error, Result};
