//! Run configuration, loaded from JSON or TOML by file extension.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{BoundaryPolicy, Grid};
use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::kernels::{KernelKind, KernelSpec};
use crate::model::{CoefficientBand, ControlGrid};
use crate::payoff::PayoffSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    /// Interval the recursion runs on; the grid is extended to cover it with
    /// the same spacing and results are reported on `[x_min, x_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute_domain: Option<[f64; 2]>,
    #[serde(default)]
    pub boundary: BoundaryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    Constant { lambda: Vec<f64> },
    RandomizedUniform,
    /// State lookup of the DP argmax.
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub band: CoefficientBand,
    pub payoff: PayoffSpec,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    pub x0: f64,
    pub grid: GridConfig,
    /// Time step; alternatively give `steps` and use `h = T / steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Step sizes of a sweep, decreasing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_list: Vec<f64>,
    /// Step counts of a sweep, increasing; used when `h_list` is empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_lambda_points")]
    pub lambda_points: usize,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    /// Step sizes for `verify-kernel`; `2^-3 … 2^-10` when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verify_h_list: Vec<f64>,
    /// Points per control axis for `verify-kernel`.
    #[serde(default = "default_verify_lambda_points")]
    pub verify_lambda_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_controls")]
    pub controls: Vec<ControlSpec>,
    /// Project simulated states onto the compute domain, matching the DP's clamp.
    #[serde(default = "default_true")]
    pub project: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_kernel() -> KernelKind {
    KernelKind::SymmetricRademacher
}
fn default_lambda_points() -> usize {
    33
}
fn default_eps_list() -> Vec<f64> {
    vec![0.5]
}
fn default_verify_lambda_points() -> usize {
    5
}
fn default_n_paths() -> usize {
    10_000
}
fn default_controls() -> Vec<ControlSpec> {
    vec![ControlSpec::Greedy, ControlSpec::RandomizedUniform]
}
fn default_true() -> bool {
    true
}

/// Step counts of the value-curve experiment.
pub const FIG1_STEPS: [usize; 6] = [40, 60, 150, 200, 1000, 1200];

impl RunConfig {
    /// Cut-off call `min(max(x - 0.5, 0), 20)` at `T = 1` under the cut-off
    /// CEV band, reported on 5000 cells over `[0, 5]`.
    pub fn fig1_preset() -> Self {
        RunConfig {
            band: CoefficientBand::cev_cutoff(),
            payoff: PayoffSpec::terminal(ScalarFn::CutoffCall { strike: 0.5, cap: 20.0 }, 1.0),
            kernel: KernelKind::SymmetricRademacher,
            x0: 1.0,
            grid: GridConfig {
                x_min: 0.0,
                x_max: 5.0,
                n_points: 5001,
                compute_domain: Some([-8.0, 20.0]),
                boundary: BoundaryPolicy::Clamp,
            },
            h: None,
            steps: Some(1200),
            h_list: Vec::new(),
            n_list: FIG1_STEPS.to_vec(),
            lambda_points: 33,
            eps_list: vec![0.5],
            verify_h_list: Vec::new(),
            verify_lambda_points: 5,
            seed: 0,
            n_paths: 100_000,
            controls: default_controls(),
            project: true,
            output_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "toml" => Self::from_toml_str(&text),
            "json" => Self::from_json_str(&text),
            _ => Err(Error::config("", format!("unknown config extension `{ext}`; use .json or .toml"))),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::config("", format!("invalid JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            toml::from_str(text).map_err(|e| Error::config("", format!("invalid TOML: {e}")))?;
        Self::from_value(value)
    }

    fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let parent = e.path().to_string();
            let msg = e.inner().to_string();
            let path = match missing_field(&msg) {
                Some(field) if parent == "." => field.to_string(),
                Some(field) => format!("{parent}.{field}"),
                None => parent,
            };
            Error::config(path, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every module invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let grid = Grid::new(g.x_min, g.x_max, g.n_points).map_err(|e| Error::config("grid", e.to_string()))?;
        if let Some([lo, hi]) = g.compute_domain {
            if !(lo.is_finite() && hi.is_finite() && lo <= g.x_min && hi >= g.x_max) {
                return Err(Error::config("grid.compute_domain", "must be finite and contain [x_min, x_max]"));
            }
        }
        self.payoff.validate("payoff")?;
        let (lo, hi) = self.compute_grid()?.0.bounds();
        self.band.validate((lo, hi), 2001, "band")?;
        if !grid.contains(self.x0) {
            return Err(Error::config("x0", format!("{} lies outside [{}, {}]", self.x0, g.x_min, g.x_max)));
        }
        match (self.h, self.steps) {
            (Some(_), Some(_)) => return Err(Error::config("h", "give either h or steps, not both")),
            (Some(h), None) if !(h > 0.0 && h <= self.payoff.horizon) => {
                return Err(Error::config("h", format!("need 0 < h <= T, got {h}")));
            }
            (None, Some(0)) => return Err(Error::config("steps", "must be at least 1")),
            _ => {}
        }
        if self.h_list.iter().any(|h| !(*h > 0.0 && *h <= self.payoff.horizon)) {
            return Err(Error::config("h_list", "entries must lie in (0, T]"));
        }
        if self.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("h_list", "must be strictly decreasing"));
        }
        if self.n_list.contains(&0) || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("n_list", "must be strictly increasing positive step counts"));
        }
        if self.verify_h_list.iter().any(|h| !(*h > 0.0)) || self.verify_h_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("verify_h_list", "must be strictly decreasing positive step sizes"));
        }
        if self.lambda_points < 2 {
            return Err(Error::config("lambda_points", "need at least 2 lattice points"));
        }
        if self.lambda_points.checked_pow(self.kernel.control_dim() as u32).is_none_or(|n| n > 1 << 24) {
            return Err(Error::config("lambda_points", "control lattice too large for this kernel"));
        }
        if self.verify_lambda_points < 2 {
            return Err(Error::config("verify_lambda_points", "need at least 2 lattice points"));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config("eps_list", "entries must be positive"));
        }
        if self.n_paths < 2 {
            return Err(Error::config("n_paths", "need at least 2 paths"));
        }
        for (i, c) in self.controls.iter().enumerate() {
            if let ControlSpec::Constant { lambda } = c {
                if lambda.len() != self.kernel.control_dim() || lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
                    return Err(Error::config(
                        format!("controls[{i}].lambda"),
                        format!("need {} coordinates in [0, 1]", self.kernel.control_dim()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The reporting grid.
    pub fn output_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n_points)
    }

    /// The grid the recursion runs on and the index of `x_min` in it.
    pub fn compute_grid(&self) -> Result<(Grid, usize)> {
        let grid = self.output_grid()?;
        match self.grid.compute_domain {
            Some([lo, hi]) => grid.extended_to(lo, hi),
            None => Ok((grid, 0)),
        }
    }

    pub fn step(&self) -> Result<f64> {
        match (self.h, self.steps) {
            (Some(h), _) => Ok(h),
            (None, Some(n)) => Ok(self.payoff.horizon / n as f64),
            (None, None) => Err(Error::config("h", "missing time step: give h or steps")),
        }
    }

    pub fn sweep_steps(&self) -> Result<Vec<f64>> {
        if !self.h_list.is_empty() {
            Ok(self.h_list.clone())
        } else if !self.n_list.is_empty() {
            Ok(self.n_list.iter().map(|&n| self.payoff.horizon / n as f64).collect())
        } else {
            Err(Error::config("h_list", "a sweep needs h_list or n_list"))
        }
    }

    pub fn verify_steps(&self) -> Vec<f64> {
        if self.verify_h_list.is_empty() {
            (3..=10).map(|k| 2f64.powi(-k)).collect()
        } else {
            self.verify_h_list.clone()
        }
    }

    pub fn control_grid(&self) -> Result<ControlGrid> {
        ControlGrid::new(self.kernel.control_dim(), self.lambda_points)
    }

    pub fn kernel_spec(&self, h: f64) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.band.clone(), h)
    }
}

fn missing_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("missing field `")?;
    rest.split('`').next()
}
