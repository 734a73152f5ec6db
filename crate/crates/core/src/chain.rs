//! Controlled Markov chains under feedback controls, their linear
//! interpolation, and Monte Carlo estimates of expected payoffs.
//!
//! Path `i` of a run with seed `s` draws from the ChaCha8 stream `(s, i)`,
//! one word pair per random number, so every path is a pure function of
//! `(seed, path index)` and results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{Grid, PricingResult};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::model::{ControlGrid, ControlPoint};
use crate::payoff::PayoffSpec;

/// Rule choosing the control from the current time step and state.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackControl {
    Constant(ControlPoint),
    /// `table[k][node]` indexes `controls` at step `k` and the grid node
    /// nearest the state. A single-row table is used at every step.
    StateLookup { grid: Grid, controls: ControlGrid, table: Vec<Vec<u32>> },
    /// An independent uniform draw from the lattice at every step.
    RandomizedUniform(ControlGrid),
}

impl FeedbackControl {
    pub fn dim(&self) -> usize {
        match self {
            FeedbackControl::Constant(p) => p.dim(),
            FeedbackControl::StateLookup { controls, .. } | FeedbackControl::RandomizedUniform(controls) => controls.dim,
        }
    }

    pub fn label(&self) -> String {
        match self {
            FeedbackControl::Constant(p) => {
                let c: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
                format!("constant({})", c.join(";"))
            }
            FeedbackControl::StateLookup { table, .. } => format!("state_lookup({} steps)", table.len()),
            FeedbackControl::RandomizedUniform(g) => format!("randomized_uniform({})", g.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        if let FeedbackControl::StateLookup { grid, controls, table } = self {
            if table.is_empty() {
                return Err(Error::Contract("state-lookup control has an empty table".into()));
            }
            let n = controls.len() as u32;
            for row in table {
                if row.len() != grid.n_points || row.iter().any(|&j| j >= n) {
                    return Err(Error::Contract("state-lookup table does not match its grid and lattice".into()));
                }
            }
        }
        Ok(())
    }

    fn select(&self, step: usize, state: f64, rng: &mut ChaCha8Rng) -> ControlPoint {
        match self {
            FeedbackControl::Constant(p) => *p,
            FeedbackControl::StateLookup { grid, controls, table } => {
                let row = &table[step.min(table.len() - 1)];
                controls.point(row[grid.nearest(state)] as usize)
            }
            FeedbackControl::RandomizedUniform(g) => g.point(rng.random_range(0..g.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub h: f64,
    /// `Y_0, …, Y_N` as `(driver, state)`.
    pub y: Vec<[f64; 2]>,
    pub seed: u64,
}

impl PathSample {
    pub fn states(&self) -> Vec<f64> {
        self.y.iter().map(|p| p[1]).collect()
    }

    /// CSV with columns `t,driver,state`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,driver,state\n");
        for (k, p) in self.y.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", k as f64 * self.h, p[0], p[1]));
        }
        out
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::InvalidKernel(m) => Error::InvalidKernel(format!("step {step}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("step {step}: {m}")),
        Error::Contract(m) => Error::Contract(format!("step {step}: {m}")),
        other => other,
    }
}

fn run_path(
    kernel: &KernelSpec,
    control: &FeedbackControl,
    x0: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
    projection: Option<(f64, f64)>,
    mut visit: impl FnMut([f64; 2]),
) -> Result<()> {
    let mut y = [0.0, x0];
    visit(y);
    for k in 0..steps {
        let lambda = control.select(k, y[1], rng);
        let support = kernel.support(&lambda, y).map_err(|e| at_step(e, k + 1))?;
        let u: f64 = rng.random();
        let [a, b] = support.atoms;
        y = if u < a.weight { a.point } else { b.point };
        if let Some((lo, hi)) = projection {
            y[1] = y[1].clamp(lo, hi);
        }
        visit(y);
    }
    Ok(())
}

/// One chain path `Y_0 = (0, x0), …, Y_steps`.
pub fn simulate(kernel: &KernelSpec, control: &FeedbackControl, x0: f64, steps: usize, seed: u64) -> Result<PathSample> {
    simulate_projected(kernel, control, x0, steps, seed, None)
}

/// Like [`simulate`], with every state projected onto `[lo, hi]` after each step.
pub fn simulate_projected(
    kernel: &KernelSpec,
    control: &FeedbackControl,
    x0: f64,
    steps: usize,
    seed: u64,
    projection: Option<(f64, f64)>,
) -> Result<PathSample> {
    if steps == 0 {
        return Err(Error::Contract("simulate needs at least one step".into()));
    }
    check_control(kernel, control)?;
    let mut y = Vec::with_capacity(steps + 1);
    run_path(kernel, control, x0, steps, &mut rng_for(seed, 0), projection, |p| y.push(p))?;
    Ok(PathSample { h: kernel.h, y, seed })
}

fn check_control(kernel: &KernelSpec, control: &FeedbackControl) -> Result<()> {
    if control.dim() != kernel.kind.control_dim() {
        return Err(Error::Contract(format!(
            "{} kernel needs {}-dimensional controls, got {}",
            kernel.kind.name(),
            kernel.kind.control_dim(),
            control.dim()
        )));
    }
    control.validate()
}

/// Continuous-time path joining the chain states linearly over steps of length `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedPath {
    h: f64,
    y: Vec<[f64; 2]>,
}

pub fn interpolate(path: &PathSample) -> InterpolatedPath {
    InterpolatedPath { h: path.h, y: path.y.clone() }
}

impl InterpolatedPath {
    pub fn horizon(&self) -> f64 {
        (self.y.len() - 1) as f64 * self.h
    }

    /// `(Z_t, X_t)`; node times `t = k h` return `Y_k` exactly.
    pub fn eval(&self, t: f64) -> Result<[f64; 2]> {
        let n = self.y.len() - 1;
        let r = t / self.h;
        if !(r >= 0.0) || r > n as f64 + 1e-9 {
            return Err(Error::Contract(format!("t = {t} outside [0, {}]", self.horizon())));
        }
        let k = r.round();
        if (r - k).abs() <= 1e-9 {
            return Ok(self.y[k as usize]);
        }
        let k = r.floor() as usize;
        let s = r - k as f64;
        let (a, b) = (self.y[k], self.y[k + 1]);
        Ok([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean and standard error of the discrete payoff over `n_paths` paths
/// with `⌊T/h⌋` steps each.
pub fn monte_carlo_value(
    kernel: &KernelSpec,
    control: &FeedbackControl,
    payoff: &PayoffSpec,
    x0: f64,
    n_paths: usize,
    seed: u64,
    projection: Option<(f64, f64)>,
) -> Result<McEstimate> {
    if n_paths < 2 {
        return Err(Error::Contract("Monte Carlo needs at least 2 paths".into()));
    }
    check_control(kernel, control)?;
    let h = kernel.h;
    let steps = payoff.steps(h);
    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let mut k = 0usize;
            let mut acc = 0.0;
            let mut last = x0;
            run_path(kernel, control, x0, steps, &mut rng, projection, |p| {
                if k < steps {
                    acc += h * payoff.g.eval(p[1]);
                }
                last = p[1];
                k += 1;
            })?;
            Ok(acc + payoff.l.eval(last))
        })
        .collect::<Result<_>>()?;
    let n = n_paths as f64;
    let mean = pairwise_sum(&samples) / n;
    let sq: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok(McEstimate { estimate: mean, std_error: (var / n).sqrt(), n_paths })
}

/// The time-dependent state-lookup control realizing the recorded DP argmax.
pub fn extract_greedy_control(result: &PricingResult) -> Result<FeedbackControl> {
    let policy = result
        .policy
        .as_ref()
        .ok_or_else(|| Error::Contract("pricing result carries no argmax records; enable record_policy".into()))?;
    Ok(FeedbackControl::StateLookup { grid: policy.grid, controls: policy.controls, table: policy.argmax.clone() })
}

/// CSV with columns `control,estimate,std_error,n_paths`.
pub fn summary_csv(rows: &[(String, McEstimate)]) -> String {
    let mut out = String::from("control,estimate,std_error,n_paths\n");
    for (label, e) in rows {
        out.push_str(&format!("{label},{},{},{}\n", e.estimate, e.std_error, e.n_paths));
    }
    out
}
