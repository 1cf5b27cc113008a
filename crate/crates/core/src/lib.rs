//! Nuclear-norm penalized empirical risk minimization over symmetric
//! matrices, and a harness that checks the sharp low-rank oracle inequality
//! for the resulting estimator empirically.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod harness;
pub mod loss;
pub mod matrix;
pub mod numeric;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
