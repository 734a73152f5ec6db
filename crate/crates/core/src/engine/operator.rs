//! The worst-case one-step operator
//! `S_h(J)(x) = h g(x) + sup_λ Σ_i w_i(λ, x) J(y_i(λ, x))`
//! over two-atom kernels, and its `⌊T/h⌋`-fold composition.
//!
//! The kernel is time-homogeneous, so the interpolation stencils of every
//! (node, control) pair are computed once and reused across all backward
//! steps. Each step is a parallel map over grid nodes that reads the previous
//! iterate and writes a fresh buffer, so the result does not depend on the
//! number of worker threads.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::grid::{BoundaryPolicy, Grid, Stencil, ValueFunction};
use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::kernels::KernelSpec;
use crate::model::{CoefficientBand, ControlGrid, ControlPoint};
use crate::payoff::PayoffSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineOptions {
    pub boundary: BoundaryPolicy,
    /// Keep the maximizing control index of every node at every step.
    pub record_policy: bool,
}

/// Maximizing control indices, `argmax[k][node]` being the decision at time `k h`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRecord {
    pub controls: ControlGrid,
    pub grid: Grid,
    pub argmax: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct PricingResult {
    pub price: f64,
    pub h: f64,
    /// `N = ⌊T/h⌋`
    pub n_steps: usize,
    /// `J^N` on the grid.
    pub value_curve: ValueFunction,
    /// Control lattice points per axis.
    pub lambda_resolution: usize,
    pub wall_time: Duration,
    /// Maximizing control indices of the first backward step (time `(N-1) h`).
    pub first_backward_argmax: Vec<u32>,
    pub policy: Option<PolicyRecord>,
}

#[derive(Debug, Clone, Copy)]
struct Transition {
    up: Stencil,
    down: Stencil,
    /// weight of `up`; `down` carries the rest
    w_up: f64,
}

/// Precomputed transitions of one operator `S_h`.
pub(crate) struct OperatorTable {
    grid: Grid,
    n_controls: usize,
    running: Vec<f64>,
    transitions: Vec<Transition>,
}

impl OperatorTable {
    /// Table of the symmetric kernel `x ± √h σ(λ, x)` with weights ½.
    pub(crate) fn symmetric(
        band: &CoefficientBand,
        g: &ScalarFn,
        h: f64,
        grid: &Grid,
        controls: &[ControlPoint],
        boundary: BoundaryPolicy,
    ) -> Result<Self> {
        if controls.iter().any(|c| c.dim() != 1) {
            return Err(Error::Contract("the symmetric operator needs one-dimensional controls".into()));
        }
        let sqrt_h = h.sqrt();
        let nodes = grid.nodes();
        let transitions = nodes
            .par_iter()
            .flat_map_iter(|&x| {
                controls.iter().map(move |lambda| {
                    let step = sqrt_h * band.sigma(lambda.get(0), x);
                    Transition {
                        up: grid.stencil(x + step, boundary),
                        down: grid.stencil(x - step, boundary),
                        w_up: 0.5,
                    }
                })
            })
            .collect();
        Ok(OperatorTable {
            grid: *grid,
            n_controls: controls.len(),
            running: nodes.iter().map(|&x| h * g.eval(x)).collect(),
            transitions,
        })
    }

    /// Table of a general two-atom kernel, reduced to its state coordinate.
    pub(crate) fn from_kernel(
        kernel: &KernelSpec,
        g: &ScalarFn,
        grid: &Grid,
        controls: &[ControlPoint],
        boundary: BoundaryPolicy,
    ) -> Result<Self> {
        let nodes = grid.nodes();
        let per_node: Vec<Vec<Transition>> = nodes
            .par_iter()
            .map(|&x| {
                controls
                    .iter()
                    .map(|lambda| {
                        let support = kernel.support(lambda, [0.0, x])?;
                        let [a, b] = support.atoms;
                        Ok(Transition {
                            up: grid.stencil(a.point[1], boundary),
                            down: grid.stencil(b.point[1], boundary),
                            w_up: a.weight,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(OperatorTable {
            grid: *grid,
            n_controls: controls.len(),
            running: nodes.iter().map(|&x| kernel.h * g.eval(x)).collect(),
            transitions: per_node.into_iter().flatten().collect(),
        })
    }

    /// One backward step. Ties in the sup go to the smallest control index.
    pub(crate) fn apply(&self, old: &[f64], new: &mut [f64], argmax: &mut [u32]) -> Result<()> {
        let nc = self.n_controls;
        new.par_iter_mut()
            .zip(argmax.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (slot, arg))| {
                let row = &self.transitions[i * nc..(i + 1) * nc];
                let mut best = f64::NEG_INFINITY;
                let mut best_j = 0u32;
                for (j, tr) in row.iter().enumerate() {
                    let up = tr.up.apply(old);
                    let down = tr.down.apply(old);
                    let v = down + tr.w_up * (up - down);
                    if v > best {
                        best = v;
                        best_j = j as u32;
                    }
                }
                let value = self.running[i] + best;
                if !value.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite value {value} at node {i} (x = {})",
                        self.grid.node(i)
                    )));
                }
                *slot = value;
                *arg = best_j;
                Ok(())
            })
    }
}

struct Iteration {
    values: Vec<f64>,
    first_argmax: Vec<u32>,
    policy: Option<Vec<Vec<u32>>>,
}

fn iterate(table: &OperatorTable, init: Vec<f64>, n_steps: usize, record: bool) -> Result<Iteration> {
    let n = init.len();
    let mut cur = init;
    let mut next = vec![0.0; n];
    let mut arg = vec![0u32; n];
    let mut first_argmax = Vec::new();
    let mut policy = record.then(|| vec![Vec::new(); n_steps]);
    for step in 1..=n_steps {
        table.apply(&cur, &mut next, &mut arg)?;
        std::mem::swap(&mut cur, &mut next);
        if step == 1 {
            first_argmax = arg.clone();
        }
        if let Some(p) = policy.as_mut() {
            p[n_steps - step] = arg.clone();
        }
    }
    Ok(Iteration { values: cur, first_argmax, policy })
}

/// One application of `S_h` for the symmetric kernel with `b ≡ 0`.
pub fn apply_s_h(
    j: &ValueFunction,
    h: f64,
    band: &CoefficientBand,
    g: &ScalarFn,
    lambda_grid: &ControlGrid,
) -> Result<ValueFunction> {
    if lambda_grid.dim != 1 {
        return Err(Error::Contract("S_h needs a one-dimensional control grid".into()));
    }
    if j.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("S_h input has non-finite values".into()));
    }
    let controls: Vec<ControlPoint> = lambda_grid.points().collect();
    let table = OperatorTable::symmetric(band, g, h, &j.grid, &controls, j.boundary)?;
    let mut out = vec![0.0; j.values.len()];
    let mut arg = vec![0u32; j.values.len()];
    table.apply(&j.values, &mut out, &mut arg)?;
    Ok(ValueFunction { grid: j.grid, values: out, boundary: j.boundary })
}

fn check_inputs(payoff: &PayoffSpec, x0: f64, h: f64, grid: &Grid) -> Result<usize> {
    if !grid.contains(x0) {
        return Err(Error::Contract(format!(
            "x0 = {x0} lies outside the grid [{}, {}]",
            grid.x_min, grid.x_max
        )));
    }
    if !(h > 0.0 && h <= payoff.horizon * (1.0 + 1e-12)) {
        return Err(Error::Contract(format!("need 0 < h <= T, got h = {h}, T = {}", payoff.horizon)));
    }
    Ok(payoff.steps(h).max(1))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    table: &OperatorTable,
    payoff: &PayoffSpec,
    x0: f64,
    h: f64,
    grid: &Grid,
    lambda_grid: Option<ControlGrid>,
    opts: &EngineOptions,
    n_steps: usize,
    started: Instant,
) -> Result<PricingResult> {
    let init = grid.nodes().into_iter().map(|x| payoff.l.eval(x)).collect();
    let it = iterate(table, init, n_steps, opts.record_policy)?;
    let value_curve = ValueFunction { grid: *grid, values: it.values, boundary: opts.boundary };
    let price = value_curve.eval(x0);
    Ok(PricingResult {
        price,
        h,
        n_steps,
        value_curve,
        lambda_resolution: lambda_grid.map_or(1, |g| g.points_per_axis),
        wall_time: started.elapsed(),
        first_backward_argmax: it.first_argmax,
        policy: match (it.policy, lambda_grid) {
            (Some(argmax), Some(controls)) => Some(PolicyRecord { controls, grid: *grid, argmax }),
            _ => None,
        },
    })
}

/// `S_h^{⌊T/h⌋}(ℓ)(x0)` with default options.
pub fn price(
    band: &CoefficientBand,
    payoff: &PayoffSpec,
    x0: f64,
    h: f64,
    grid: &Grid,
    lambda_grid: &ControlGrid,
) -> Result<PricingResult> {
    price_with(band, payoff, x0, h, grid, lambda_grid, &EngineOptions::default())
}

pub fn price_with(
    band: &CoefficientBand,
    payoff: &PayoffSpec,
    x0: f64,
    h: f64,
    grid: &Grid,
    lambda_grid: &ControlGrid,
    opts: &EngineOptions,
) -> Result<PricingResult> {
    let started = Instant::now();
    if lambda_grid.dim != 1 {
        return Err(Error::Contract("price needs a one-dimensional control grid".into()));
    }
    let n_steps = check_inputs(payoff, x0, h, grid)?;
    let controls: Vec<ControlPoint> = lambda_grid.points().collect();
    let table = OperatorTable::symmetric(band, &payoff.g, h, grid, &controls, opts.boundary)?;
    finish(&table, payoff, x0, h, grid, Some(*lambda_grid), opts, n_steps, started)
}

/// The same backward recursion with the control frozen at `lambda` (no sup).
pub fn price_frozen(
    band: &CoefficientBand,
    payoff: &PayoffSpec,
    x0: f64,
    h: f64,
    grid: &Grid,
    lambda: f64,
    opts: &EngineOptions,
) -> Result<PricingResult> {
    let started = Instant::now();
    let n_steps = check_inputs(payoff, x0, h, grid)?;
    let controls = [ControlPoint::scalar(lambda)?];
    let table = OperatorTable::symmetric(band, &payoff.g, h, grid, &controls, opts.boundary)?;
    let opts = EngineOptions { record_policy: false, ..*opts };
    finish(&table, payoff, x0, h, grid, None, &opts, n_steps, started)
}

/// Backward recursion `J <- h g + max_λ Σ w_i J(atom_i)` for any two-atom
/// kernel; the step is the kernel's `h`.
pub fn worst_case_expectation(
    kernel: &KernelSpec,
    payoff: &PayoffSpec,
    x0: f64,
    grid: &Grid,
    lambda_grid: &ControlGrid,
    opts: &EngineOptions,
) -> Result<PricingResult> {
    let started = Instant::now();
    if lambda_grid.dim != kernel.kind.control_dim() {
        return Err(Error::Contract(format!(
            "{} kernel needs a {}-dimensional control grid, got {}",
            kernel.kind.name(),
            kernel.kind.control_dim(),
            lambda_grid.dim
        )));
    }
    let n_steps = check_inputs(payoff, x0, kernel.h, grid)?;
    let controls: Vec<ControlPoint> = lambda_grid.points().collect();
    let table = OperatorTable::from_kernel(kernel, &payoff.g, grid, &controls, opts.boundary)?;
    finish(&table, payoff, x0, kernel.h, grid, Some(*lambda_grid), opts, n_steps, started)
}

/// Linear recursion of a two-atom kernel under one fixed control point.
pub fn frozen_kernel_expectation(
    kernel: &KernelSpec,
    payoff: &PayoffSpec,
    x0: f64,
    grid: &Grid,
    lambda: &ControlPoint,
    opts: &EngineOptions,
) -> Result<PricingResult> {
    let started = Instant::now();
    let n_steps = check_inputs(payoff, x0, kernel.h, grid)?;
    let table = OperatorTable::from_kernel(kernel, &payoff.g, grid, std::slice::from_ref(lambda), opts.boundary)?;
    let opts = EngineOptions { record_policy: false, ..*opts };
    finish(&table, payoff, x0, kernel.h, grid, None, &opts, n_steps, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;

    fn band_1_4() -> CoefficientBand {
        CoefficientBand::constant(0.0, 0.0, 1.0, 4.0, 4.0)
    }

    #[test]
    fn constants_are_fixed_points() {
        let grid = Grid::new(-3.0, 3.0, 61).unwrap();
        let j = ValueFunction::from_fn(grid, BoundaryPolicy::Clamp, |_| 2.5);
        let lg = ControlGrid::new(1, 9).unwrap();
        let out = apply_s_h(&j, 0.01, &CoefficientBand::cev_cutoff(), &ScalarFn::Zero, &lg).unwrap();
        assert!(out.values.iter().all(|v| *v == 2.5));
    }

    #[test]
    fn linear_functions_are_preserved_inside() {
        let grid = Grid::new(-5.0, 5.0, 1001).unwrap();
        let j = ValueFunction::from_fn(grid, BoundaryPolicy::Clamp, |x| x);
        let h = 0.01;
        let lg = ControlGrid::new(1, 9).unwrap();
        let out = apply_s_h(&j, h, &band_1_4(), &ScalarFn::Zero, &lg).unwrap();
        for (i, v) in out.values.iter().enumerate() {
            let x = grid.node(i);
            if x.abs() < 5.0 - 0.2 - 1e-9 {
                assert!((v - x).abs() < 1e-12, "x = {x}, v = {v}");
            }
        }
    }

    #[test]
    fn quadratic_gains_max_variance() {
        let grid = Grid::new(-5.0, 5.0, 2001).unwrap();
        let delta = grid.spacing();
        let j = ValueFunction::from_fn(grid, BoundaryPolicy::Clamp, |x| x * x);
        let h = 0.01;
        let lg = ControlGrid::new(1, 33).unwrap();
        let out = apply_s_h(&j, h, &band_1_4(), &ScalarFn::Zero, &lg).unwrap();
        for (i, v) in out.values.iter().enumerate() {
            let x = grid.node(i);
            if x.abs() < 4.5 {
                let expected = x * x + 4.0 * h;
                assert!((v - expected).abs() <= delta * delta / 4.0 + 1e-12, "x = {x}: {v} vs {expected}");
            }
        }
    }

    #[test]
    fn constant_payoff_prices_exactly() {
        let grid = Grid::new(0.0, 5.0, 501).unwrap();
        let payoff = PayoffSpec::terminal(ScalarFn::constant(7.0), 1.0);
        let lg = ControlGrid::new(1, 33).unwrap();
        for h in [0.1, 0.05, 1.0 / 30.0] {
            let r = price(&CoefficientBand::cev_cutoff(), &payoff, 1.3, h, &grid, &lg).unwrap();
            assert_eq!(r.price, 7.0);
            assert_eq!(r.n_steps, payoff.steps(h));
        }
    }

    #[test]
    fn price_contract_violations() {
        let grid = Grid::new(0.0, 5.0, 51).unwrap();
        let payoff = PayoffSpec::terminal(ScalarFn::Identity, 1.0);
        let lg = ControlGrid::new(1, 3).unwrap();
        let band = CoefficientBand::cev_cutoff();
        assert!(matches!(price(&band, &payoff, 6.0, 0.1, &grid, &lg), Err(Error::Contract(_))));
        assert!(matches!(price(&band, &payoff, 1.0, 2.0, &grid, &lg), Err(Error::Contract(_))));
        let lg2 = ControlGrid::new(2, 3).unwrap();
        assert!(matches!(price(&band, &payoff, 1.0, 0.1, &grid, &lg2), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_values_are_reported_with_node() {
        let grid = Grid::new(0.0, 1.0, 11).unwrap();
        let mut j = ValueFunction::from_fn(grid, BoundaryPolicy::Clamp, |_| 1.0);
        j.values[3] = f64::INFINITY;
        let lg = ControlGrid::new(1, 3).unwrap();
        assert!(matches!(apply_s_h(&j, 0.01, &band_1_4(), &ScalarFn::Zero, &lg), Err(Error::Numeric(_))));

        let payoff = PayoffSpec { g: ScalarFn::constant(f64::MAX), l: ScalarFn::constant(f64::MAX), horizon: 1.0, domain: None };
        let err = price(&band_1_4(), &payoff, 0.5, 0.5, &grid, &lg).unwrap_err();
        assert!(err.to_string().contains("node"), "{err}");
    }

    #[test]
    fn generic_recursion_matches_specialized_bitwise() {
        let band = CoefficientBand::cev_cutoff();
        let grid = Grid::new(0.0, 5.0, 501).unwrap();
        let payoff = PayoffSpec { g: ScalarFn::Put { strike: 2.0 }, ..PayoffSpec::terminal(ScalarFn::CutoffCall { strike: 0.5, cap: 20.0 }, 1.0) };
        let lg = ControlGrid::new(1, 17).unwrap();
        let h = 0.02;
        let a = price(&band, &payoff, 1.0, h, &grid, &lg).unwrap();
        let kernel = KernelSpec::new(KernelKind::SymmetricRademacher, band, h).unwrap();
        let b = worst_case_expectation(&kernel, &payoff, 1.0, &grid, &lg, &EngineOptions::default()).unwrap();
        assert_eq!(a.price.to_bits(), b.price.to_bits());
        assert_eq!(a.value_curve.values, b.value_curve.values);
        assert_eq!(a.first_backward_argmax, b.first_backward_argmax);
    }

    #[test]
    fn degenerate_band_picks_smallest_control() {
        let band = CoefficientBand::constant(0.0, 0.0, 2.0, 2.0, 2.0);
        let grid = Grid::new(-4.0, 4.0, 81).unwrap();
        let payoff = PayoffSpec::terminal(ScalarFn::Call { strike: 0.0 }, 1.0);
        let lg = ControlGrid::new(1, 5).unwrap();
        let opts = EngineOptions { record_policy: true, ..Default::default() };
        let r = price_with(&band, &payoff, 0.0, 0.1, &grid, &lg, &opts).unwrap();
        let policy = r.policy.unwrap();
        assert_eq!(policy.argmax.len(), 10);
        assert!(policy.argmax.iter().flatten().all(|&j| j == 0));
    }
}
