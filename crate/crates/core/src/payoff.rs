//! Claims `f = ∫₀ᵀ g(X_s) ds + ℓ(X_T)` and their discrete-time versions
//! `f^h = Σ_{i < ⌊T/h⌋} h g(Y_i) + ℓ(Y_{⌊T/h⌋})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::ScalarFn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    /// Running payoff rate.
    pub g: ScalarFn,
    /// Terminal payoff.
    pub l: ScalarFn,
    /// Horizon.
    #[serde(rename = "T")]
    pub horizon: f64,
    /// State interval the sup-norms are taken over; the whole line when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
}

impl PayoffSpec {
    pub fn terminal(l: ScalarFn, horizon: f64) -> Self {
        PayoffSpec { g: ScalarFn::Zero, l, horizon, domain: None }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = Some([lo, hi]);
        self
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(format!("{path}.T"), "horizon must be positive and finite"));
        }
        self.g.validate(&format!("{path}.g"))?;
        self.l.validate(&format!("{path}.l"))?;
        if let Some([lo, hi]) = self.domain {
            if !(lo < hi) {
                return Err(Error::config(format!("{path}.domain"), "need lo < hi"));
            }
        }
        Ok(())
    }

    /// Number of steps `⌊T/h⌋`.
    pub fn steps(&self, h: f64) -> usize {
        step_count(self.horizon, h)
    }

    pub fn g_sup(&self) -> f64 {
        let [lo, hi] = self.domain.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
        self.g.sup_abs_on(lo, hi)
    }

    pub fn l_sup(&self) -> f64 {
        let [lo, hi] = self.domain.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
        self.l.sup_abs_on(lo, hi)
    }

    /// `T ‖g‖∞ + ‖ℓ‖∞` over the declared domain.
    pub fn payoff_bound(&self) -> f64 {
        self.horizon * self.g_sup() + self.l_sup()
    }

    /// `f^h` evaluated on the state path `Y_0, …, Y_N`, `N >= ⌊T/h⌋`.
    pub fn discrete_payoff(&self, h: f64, path: &[f64]) -> Result<f64> {
        let n = self.steps(h);
        if path.len() < n + 1 {
            return Err(Error::Contract(format!(
                "payoff needs {} path states for T = {} and h = {h}, got {}",
                n + 1,
                self.horizon,
                path.len()
            )));
        }
        let running: f64 = path[..n].iter().map(|&y| h * self.g.eval(y)).sum();
        Ok(running + self.l.eval(path[n]))
    }
}

/// `⌊T/h⌋`, robust to `T/h` landing a hair below an integer.
pub fn step_count(horizon: f64, h: f64) -> usize {
    let r = horizon / h;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * n.max(1.0) {
        n as usize
    } else {
        r.floor() as usize
    }
}
