//! Subcommands of the `robust-mca` binary. Every output file is a function of
//! the configuration and seed only; timings go to standard error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::chain::{self, FeedbackControl, McEstimate, PathSample};
use crate::config::{ControlSpec, RunConfig};
use crate::engine::{self, EngineOptions, PricingResult, SweepReport, ValueFunction};
use crate::error::{Error, Result};
use crate::kernels::{self, ConvergenceReport, KernelKind};
use crate::model::ControlPoint;
use crate::report::{self, Series};

#[derive(Debug, Parser)]
#[command(name = "robust-mca", version, about = "Worst-case prices under drift and volatility uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (.json or .toml).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Price at x0; writes price.csv and value_curve.csv.
    Price,
    /// Prices over a list of step sizes; writes sweep.csv.
    Sweep,
    /// Moment residuals and tail mass of the kernel; writes verify_kernel.csv.
    VerifyKernel,
    /// Sample path and Monte Carlo values; writes path.csv and mc_summary.csv.
    Simulate,
    /// Value curves of the cut-off call experiment; writes one CSV per N,
    /// fig1.svg and fig1_gaps.csv.
    ReproduceFig1,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let mut cfg = match (&cli.config, cli.command) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Command::ReproduceFig1) => RunConfig::fig1_preset(),
        (None, _) => return Err(Error::config("--config", "this subcommand needs a config file")),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Price => run_price(&cfg, &out),
        Command::Sweep => run_sweep(&cfg, &out),
        Command::VerifyKernel => run_verify_kernel(&cfg, &out),
        Command::Simulate => run_simulate(&cfg, &out),
        Command::ReproduceFig1 => run_reproduce_fig1(&cfg, &out),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn options(cfg: &RunConfig, record_policy: bool) -> EngineOptions {
    EngineOptions { boundary: cfg.grid.boundary, record_policy }
}

fn dp(cfg: &RunConfig, h: f64, record_policy: bool) -> Result<PricingResult> {
    let (grid, offset) = cfg.compute_grid()?;
    let lg = cfg.control_grid()?;
    let opts = options(cfg, record_policy);
    let mut r = match cfg.kernel {
        KernelKind::SymmetricRademacher => engine::price_with(&cfg.band, &cfg.payoff, cfg.x0, h, &grid, &lg, &opts)?,
        _ => engine::worst_case_expectation(&cfg.kernel_spec(h)?, &cfg.payoff, cfg.x0, &grid, &lg, &opts)?,
    };
    r.value_curve = r.value_curve.restrict(cfg.output_grid()?, offset)?;
    Ok(r)
}

/// DP price at `x0` with the value curve on the reporting grid.
pub fn compute_price(cfg: &RunConfig) -> Result<PricingResult> {
    dp(cfg, cfg.step()?, false)
}

pub fn run_price(cfg: &RunConfig, out: &Path) -> Result<String> {
    let r = compute_price(cfg)?;
    write(out, "price.csv", &format!("x0,h,N,price,lambda_points\n{},{},{},{},{}\n", cfg.x0, r.h, r.n_steps, r.price, r.lambda_resolution))?;
    write(out, "value_curve.csv", &r.value_curve.to_csv())?;
    eprintln!("N = {}, wall time {:.3} s", r.n_steps, r.wall_time.as_secs_f64());
    Ok(format!("{}\n", r.price))
}

pub fn compute_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    if cfg.kernel != KernelKind::SymmetricRademacher {
        return Err(Error::config("kernel", "sweep runs the symmetric operator; set kernel = \"symmetric_rademacher\""));
    }
    let (grid, _) = cfg.compute_grid()?;
    engine::sweep(&cfg.band, &cfg.payoff, cfg.x0, &cfg.sweep_steps()?, &grid, &cfg.control_grid()?, &options(cfg, false))
}

pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<String> {
    let rep = compute_sweep(cfg)?;
    write(out, "sweep.csv", &rep.to_csv())?;
    eprintln!("x0 is {:.2} diffusion lengths from the grid boundary", rep.boundary_distance);
    for &i in &rep.non_cauchy {
        eprintln!("warning: successive difference grows at N = {}", rep.rows[i + 1].n_steps);
    }
    Ok(rep.to_csv())
}

pub fn compute_verify(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let grid = cfg.output_grid()?;
    let probes: Vec<[f64; 2]> = (0..21).map(|i| [0.0, grid.x_min + (grid.x_max - grid.x_min) * i as f64 / 20.0]).collect();
    let lg = crate::model::ControlGrid::new(cfg.kernel.control_dim(), cfg.verify_lambda_points)?;
    kernels::verify_convergence(|h| cfg.kernel_spec(h), &cfg.verify_steps(), &lg, &probes, &cfg.eps_list)
}

pub fn run_verify_kernel(cfg: &RunConfig, out: &Path) -> Result<String> {
    let rep = compute_verify(cfg)?;
    write(out, "verify_kernel.csv", &rep.to_csv())?;
    for f in &rep.flags {
        eprintln!("flag: {f}");
    }
    let fmt = |s: Option<f64>| s.map_or("undefined".to_string(), |v| format!("{v:.4}"));
    Ok(format!("{}: slope_a = {}, slope_b = {}\n", rep.kind.name(), fmt(rep.slope_a), fmt(rep.slope_b)))
}

pub struct Simulation {
    pub dp_price: Option<f64>,
    pub path: PathSample,
    pub summary: Vec<(String, McEstimate)>,
}

pub fn compute_simulation(cfg: &RunConfig) -> Result<Simulation> {
    let h = cfg.step()?;
    let kernel = cfg.kernel_spec(h)?;
    let (grid, _) = cfg.compute_grid()?;
    let projection = cfg.project.then(|| grid.bounds());
    let mut dp_price = None;
    let mut controls = Vec::with_capacity(cfg.controls.len());
    for spec in &cfg.controls {
        let c = match spec {
            ControlSpec::Constant { lambda } => FeedbackControl::Constant(ControlPoint::new(lambda)?),
            ControlSpec::RandomizedUniform => FeedbackControl::RandomizedUniform(cfg.control_grid()?),
            ControlSpec::Greedy => {
                let r = dp(cfg, h, true)?;
                dp_price = Some(r.price);
                chain::extract_greedy_control(&r)?
            }
        };
        controls.push(c);
    }
    if controls.is_empty() {
        return Err(Error::config("controls", "need at least one control"));
    }
    let steps = cfg.payoff.steps(h).max(1);
    let path = chain::simulate_projected(&kernel, &controls[0], cfg.x0, steps, cfg.seed, projection)?;
    let summary = controls
        .iter()
        .map(|c| {
            let e = chain::monte_carlo_value(&kernel, c, &cfg.payoff, cfg.x0, cfg.n_paths, cfg.seed, projection)?;
            Ok((c.label(), e))
        })
        .collect::<Result<_>>()?;
    Ok(Simulation { dp_price, path, summary })
}

pub fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let sim = compute_simulation(cfg)?;
    write(out, "path.csv", &sim.path.to_csv())?;
    let csv = chain::summary_csv(&sim.summary);
    write(out, "mc_summary.csv", &csv)?;
    let mut msg = String::new();
    if let Some(p) = sim.dp_price {
        msg.push_str(&format!("dp price {p}\n"));
    }
    msg.push_str(&csv);
    Ok(msg)
}

pub struct Fig1Report {
    /// `(N, V_N)` on the reporting grid.
    pub curves: Vec<(usize, ValueFunction)>,
    pub prices: Vec<f64>,
    /// `sup |V_{N_{i+1}} - V_{N_i}|` over the reporting grid.
    pub gaps: Vec<f64>,
}

/// Value curves `V_N` for every `N` of `n_list`.
pub fn compute_fig1(cfg: &RunConfig) -> Result<Fig1Report> {
    if cfg.n_list.len() < 2 {
        return Err(Error::config("n_list", "need at least two step counts"));
    }
    let mut curves = Vec::with_capacity(cfg.n_list.len());
    let mut prices = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let r = dp(cfg, cfg.payoff.horizon / n as f64, false)?;
        prices.push(r.price);
        curves.push((n, r.value_curve));
    }
    let gaps = curves.windows(2).map(|w| w[1].1.sup_distance(&w[0].1)).collect();
    Ok(Fig1Report { curves, prices, gaps })
}

pub fn run_reproduce_fig1(cfg: &RunConfig, out: &Path) -> Result<String> {
    let rep = compute_fig1(cfg)?;
    let mut series = Vec::with_capacity(rep.curves.len());
    for (n, vf) in &rep.curves {
        write(out, &format!("value_curve_N{n}.csv"), &vf.to_csv())?;
        let points = vf.values.iter().enumerate().map(|(i, v)| (vf.grid.node(i), *v)).collect();
        series.push(Series { label: format!("N = {n}"), points });
    }
    write(out, "fig1.svg", &report::line_plot("V_N = S_{1/N}^N(l)", "x", "V_N(x)", &series))?;
    let mut gaps = String::from("N_from,N_to,sup_gap\n");
    for (w, g) in rep.curves.windows(2).zip(&rep.gaps) {
        gaps.push_str(&format!("{},{},{}\n", w[0].0, w[1].0, g));
    }
    write(out, "fig1_gaps.csv", &gaps)?;
    Ok(gaps)
}
