//! Robust superhedging prices under drift and volatility uncertainty,
//! computed by Markov chain approximation.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod func;
pub mod kernels;
pub mod model;
pub mod payoff;
pub mod report;

pub use error::{Error, Result};
