// `!(x >= lo)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ade;
pub mod cfa;
pub mod error;
pub mod cli;
pub mod losses;
pub mod media_io;
pub mod metrics;
pub mod nn;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
