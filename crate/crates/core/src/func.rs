//! Closed catalogue of scalar functions of the state.
//!
//! Coefficient bands and payoffs are both built from these families so that
//! every run configuration is plain data. Each family is piecewise monotone
//! between a finite set of breakpoints, which makes sup-norms over an
//! interval exactly computable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarFn {
    Zero,
    Constant { value: f64 },
    Identity,
    /// `alpha + beta * x`
    Affine { alpha: f64, beta: f64 },
    /// `min(max(x, lo), hi)`
    Clamp { lo: f64, hi: f64 },
    /// `min(max(x, lo), hi)^p`
    PowerClamp { lo: f64, hi: f64, p: f64 },
    /// `max(x - strike, 0)`
    Call { strike: f64 },
    /// `max(strike - x, 0)`
    Put { strike: f64 },
    /// `min(max(x - strike, 0), cap)`
    CutoffCall { strike: f64, cap: f64 },
    /// Piecewise-linear through `(xs[i], ys[i])`, flat outside `[xs[0], xs[n-1]]`.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Constant { value } => *value,
            ScalarFn::Identity => x,
            ScalarFn::Affine { alpha, beta } => {
                if *beta == 0.0 {
                    *alpha
                } else {
                    alpha + beta * x
                }
            }
            ScalarFn::Clamp { lo, hi } => x.max(*lo).min(*hi),
            ScalarFn::PowerClamp { lo, hi, p } => x.max(*lo).min(*hi).powf(*p),
            ScalarFn::Call { strike } => (x - strike).max(0.0),
            ScalarFn::Put { strike } => (strike - x).max(0.0),
            ScalarFn::CutoffCall { strike, cap } => (x - strike).max(0.0).min(*cap),
            ScalarFn::Table { xs, ys } => table_eval(xs, ys, x),
        }
    }

    /// Checks the family parameters; `path` prefixes error messages.
    pub fn validate(&self, path: &str) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{path}.{name}"), "must be finite"))
            }
        };
        match self {
            ScalarFn::Zero | ScalarFn::Identity => Ok(()),
            ScalarFn::Constant { value } => finite("value", *value),
            ScalarFn::Affine { alpha, beta } => {
                finite("alpha", *alpha)?;
                finite("beta", *beta)
            }
            ScalarFn::Clamp { lo, hi } | ScalarFn::PowerClamp { lo, hi, .. } => {
                finite("lo", *lo)?;
                finite("hi", *hi)?;
                if lo > hi {
                    return Err(Error::config(format!("{path}.lo"), "lo must not exceed hi"));
                }
                if let ScalarFn::PowerClamp { p, .. } = self {
                    finite("p", *p)?;
                }
                Ok(())
            }
            ScalarFn::Call { strike } | ScalarFn::Put { strike } => finite("strike", *strike),
            ScalarFn::CutoffCall { strike, cap } => {
                finite("strike", *strike)?;
                finite("cap", *cap)?;
                if *cap < 0.0 {
                    return Err(Error::config(format!("{path}.cap"), "cap must be nonnegative"));
                }
                Ok(())
            }
            ScalarFn::Table { xs, ys } => {
                if xs.len() < 2 {
                    return Err(Error::config(format!("{path}.xs"), "need at least two breakpoints"));
                }
                if xs.len() != ys.len() {
                    return Err(Error::config(
                        format!("{path}.ys"),
                        format!("length {} does not match xs length {}", ys.len(), xs.len()),
                    ));
                }
                if let Some(i) = xs.iter().chain(ys).position(|v| !v.is_finite()) {
                    let (name, idx) = if i < xs.len() { ("xs", i) } else { ("ys", i - xs.len()) };
                    return Err(Error::config(format!("{path}.{name}[{idx}]"), "must be finite"));
                }
                if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(Error::config(
                        format!("{path}.xs[{}]", i + 1),
                        "breakpoints must be strictly increasing",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Points where the function may change monotonicity or slope.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ScalarFn::Clamp { lo, hi } | ScalarFn::PowerClamp { lo, hi, .. } => vec![*lo, *hi],
            ScalarFn::Call { strike } | ScalarFn::Put { strike } => vec![*strike],
            ScalarFn::CutoffCall { strike, cap } => vec![*strike, strike + cap],
            ScalarFn::Table { xs, .. } => xs.clone(),
            _ => Vec::new(),
        }
    }

    /// `sup |f|` over `[lo, hi]`, exact for every catalogue family. Infinite
    /// endpoints are allowed and evaluate to the limit at infinity.
    pub fn sup_abs_on(&self, lo: f64, hi: f64) -> f64 {
        let mut pts = vec![lo, hi, 0.0];
        pts.extend(self.breakpoints());
        pts.into_iter()
            .filter(|x| *x >= lo && *x <= hi)
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }
}

fn table_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // first index with xs[i] > x; i in 1..n
    let i = xs.partition_point(|v| *v <= x);
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    let t = (x - x0) / (x1 - x0);
    y0 + t * (y1 - y0)
}
