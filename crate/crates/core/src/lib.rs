#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod measures;
pub mod models;
pub mod numeric;
pub mod priors;
pub mod remote_contiguity;
pub mod rng;
pub mod testing;

pub use error::{Error, Result};
