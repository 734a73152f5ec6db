//! Coefficient bands, control parameters and the limit diffusion coefficients.
//!
//! The drift and variance of the state are only known to lie in state-dependent
//! bands `[b_lower(x), b_upper(x)]` and `[a_lower(x), a_upper(x)]`. A control
//! parameter `λ ∈ [0, 1]` selects a point inside a band by affine
//! interpolation between its edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::ScalarFn;

/// Drift and variance bands with the global bound `C`:
/// `-C <= b_lower <= b_upper <= C` and `1/C <= a_lower <= a_upper <= C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBand {
    pub b_lower: ScalarFn,
    pub b_upper: ScalarFn,
    pub a_lower: ScalarFn,
    pub a_upper: ScalarFn,
    pub bound_c: f64,
}

impl CoefficientBand {
    /// Band with state-independent edges.
    pub fn constant(b_lower: f64, b_upper: f64, a_lower: f64, a_upper: f64, bound_c: f64) -> Self {
        CoefficientBand {
            b_lower: ScalarFn::constant(b_lower),
            b_upper: ScalarFn::constant(b_upper),
            a_lower: ScalarFn::constant(a_lower),
            a_upper: ScalarFn::constant(a_upper),
            bound_c,
        }
    }

    /// Zero drift, `a_lower(x) = clamp(x, 1, 30)` and `a_upper = a_lower^2`:
    /// a cut-off CEV model with uncertain power parameter in `[1, 2]`.
    pub fn cev_cutoff() -> Self {
        CoefficientBand {
            b_lower: ScalarFn::Zero,
            b_upper: ScalarFn::Zero,
            a_lower: ScalarFn::Clamp { lo: 1.0, hi: 30.0 },
            a_upper: ScalarFn::PowerClamp { lo: 1.0, hi: 30.0, p: 2.0 },
            bound_c: 900.0,
        }
    }

    /// Affine interpolation between the drift edges.
    #[inline]
    pub fn drift(&self, lambda: f64, x: f64) -> f64 {
        let lo = self.b_lower.eval(x);
        lo + lambda * (self.b_upper.eval(x) - lo)
    }

    #[inline]
    pub fn variance(&self, lambda: f64, x: f64) -> f64 {
        let lo = self.a_lower.eval(x);
        lo + lambda * (self.a_upper.eval(x) - lo)
    }

    /// `sqrt(a_lower(x) + λ (a_upper(x) - a_lower(x)))`
    #[inline]
    pub fn sigma(&self, lambda: f64, x: f64) -> f64 {
        self.variance(lambda, x).sqrt()
    }

    /// Checks the band invariants on `probes` equispaced points of `domain`
    /// plus every breakpoint of the four edge functions inside it.
    pub fn validate(&self, domain: (f64, f64), probes: usize, path: &str) -> Result<()> {
        let c = self.bound_c;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::config(format!("{path}.bound_c"), "must be positive and finite"));
        }
        if c < 1.0 {
            // 1/C <= C is required for the variance band to be nonempty.
            return Err(Error::config(format!("{path}.bound_c"), "must be at least 1"));
        }
        for (name, f) in self.named_edges() {
            f.validate(&format!("{path}.{name}"))?;
        }
        for x in self.probe_points(domain, probes) {
            let (bl, bu) = (self.b_lower.eval(x), self.b_upper.eval(x));
            let (al, au) = (self.a_lower.eval(x), self.a_upper.eval(x));
            let fail = |name: &str, msg: String| Err(Error::config(format!("{path}.{name}"), msg));
            if !(bl.is_finite() && bl >= -c) {
                return fail("b_lower", format!("b_lower({x}) = {bl} violates -C <= b_lower"));
            }
            if !(bu.is_finite() && bu >= bl) {
                return fail("b_upper", format!("b_upper({x}) = {bu} is below b_lower = {bl}"));
            }
            if bu > c {
                return fail("b_upper", format!("b_upper({x}) = {bu} exceeds C = {c}"));
            }
            if !(al.is_finite() && al >= 1.0 / c) {
                return fail("a_lower", format!("a_lower({x}) = {al} is below 1/C = {}", 1.0 / c));
            }
            if !(au.is_finite() && au >= al) {
                return fail("a_upper", format!("a_upper({x}) = {au} is below a_lower = {al}"));
            }
            if au > c {
                return fail("a_upper", format!("a_upper({x}) = {au} exceeds C = {c}"));
            }
        }
        Ok(())
    }

    /// Largest `a_upper` over the probe points of `domain`.
    pub fn max_variance_on(&self, domain: (f64, f64), probes: usize) -> f64 {
        self.probe_points(domain, probes)
            .into_iter()
            .map(|x| self.a_upper.eval(x))
            .fold(0.0, f64::max)
    }

    fn named_edges(&self) -> [(&'static str, &ScalarFn); 4] {
        [
            ("b_lower", &self.b_lower),
            ("b_upper", &self.b_upper),
            ("a_lower", &self.a_lower),
            ("a_upper", &self.a_upper),
        ]
    }

    fn probe_points(&self, (lo, hi): (f64, f64), probes: usize) -> Vec<f64> {
        let mut pts = linspace(lo, hi, probes.max(2));
        for (_, f) in self.named_edges() {
            pts.extend(f.breakpoints().into_iter().filter(|x| *x >= lo && *x <= hi));
        }
        pts
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// A point of the action space `[0, 1]^k`, `k <= 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    coords: [f64; 4],
    dim: usize,
}

impl ControlPoint {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if !matches!(coords.len(), 1 | 2 | 4) {
            return Err(Error::Contract(format!(
                "control dimension must be 1, 2 or 4, got {}",
                coords.len()
            )));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Contract(format!("control coordinate {c} outside [0, 1]")));
        }
        let mut buf = [0.0; 4];
        buf[..coords.len()].copy_from_slice(coords);
        Ok(ControlPoint { coords: buf, dim: coords.len() })
    }

    pub fn scalar(lambda: f64) -> Result<Self> {
        Self::new(&[lambda])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.coords[i]
    }
}

/// Equispaced lattice over `[0, 1]^k` containing every corner. Points are
/// enumerated in lexicographic order with the first axis varying slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlGrid {
    pub dim: usize,
    pub points_per_axis: usize,
}

impl ControlGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if !matches!(dim, 1 | 2 | 4) {
            return Err(Error::Contract(format!("control dimension must be 1, 2 or 4, got {dim}")));
        }
        if points_per_axis < 2 {
            return Err(Error::Contract("control grid needs at least 2 points per axis".into()));
        }
        Ok(ControlGrid { dim, points_per_axis })
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_value(&self, j: usize) -> f64 {
        let n = self.points_per_axis;
        if j + 1 == n {
            1.0
        } else {
            j as f64 / (n - 1) as f64
        }
    }

    pub fn point(&self, index: usize) -> ControlPoint {
        let n = self.points_per_axis;
        let mut coords = [0.0; 4];
        let mut rem = index;
        for d in (0..self.dim).rev() {
            coords[d] = self.axis_value(rem % n);
            rem /= n;
        }
        ControlPoint { coords, dim: self.dim }
    }

    pub fn points(&self) -> impl Iterator<Item = ControlPoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// The lattice with every axis interval halved; a superset of `self`.
    pub fn refined(&self) -> Self {
        ControlGrid { dim: self.dim, points_per_axis: 2 * self.points_per_axis - 1 }
    }
}

/// Limit coefficients of the controlled diffusion `dZ = b dt + σ dW`, and
/// their extension to the pair (driver `W`, state `Z`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCoefficients {
    pub drift: f64,
    pub vol: f64,
}

impl LimitCoefficients {
    /// `(0, b)`
    pub fn extended_drift(&self) -> [f64; 2] {
        [0.0, self.drift]
    }

    /// `[[1, σ], [σ, σ²]]`
    pub fn extended_diffusion(&self) -> [[f64; 2]; 2] {
        let s = self.vol;
        [[1.0, s], [s, s * s]]
    }
}

/// Probe-based lower estimate of the Lipschitz constant of `(b, σ)` in the
/// state, uniformly over `λ`:
/// `max (|b(λ,x) - b(λ,y)| + |σ(λ,x) - σ(λ,y)|) / |x - y|` over a probe lattice.
pub fn lipschitz_estimate(band: &CoefficientBand, domain: (f64, f64), probe_count: usize) -> Result<f64> {
    if probe_count < 2 {
        return Err(Error::Contract("lipschitz_estimate needs probe_count >= 2".into()));
    }
    let xs = linspace(domain.0, domain.1, probe_count);
    let lambdas = linspace(0.0, 1.0, probe_count);
    let mut best = 0.0_f64;
    let mut vals = vec![(0.0, 0.0); xs.len()];
    for &lambda in &lambdas {
        for (slot, &x) in vals.iter_mut().zip(&xs) {
            let (b, s) = (band.drift(lambda, x), band.sigma(lambda, x));
            if !(b.is_finite() && s.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite coefficient at probe (λ = {lambda}, x = {x}): b = {b}, σ = {s}"
                )));
            }
            *slot = (b, s);
        }
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                let q = ((vals[i].0 - vals[j].0).abs() + (vals[i].1 - vals[j].1).abs()) / (xs[j] - xs[i]);
                best = best.max(q);
            }
        }
    }
    Ok(best)
}
