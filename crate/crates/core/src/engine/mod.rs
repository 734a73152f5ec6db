//! Grid, value functions, the worst-case operator and convergence sweeps.

mod grid;
mod operator;
mod sweep;

pub use grid::{BoundaryPolicy, Grid, Stencil, ValueFunction};
pub use operator::{
    apply_s_h, frozen_kernel_expectation, price, price_frozen, price_with, worst_case_expectation, EngineOptions,
    PolicyRecord, PricingResult,
};
pub use sweep::{order_estimate, sweep, SweepReport, SweepRow};
