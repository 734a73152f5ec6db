use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How `J` is evaluated beyond the ends of the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Use the value at the nearest edge node.
    #[default]
    Clamp,
    /// Extend the first/last grid segment linearly.
    LinearExtrapolate,
}

/// Uniform grid `x_min = x_0 < … < x_{n-1} = x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

/// Linear interpolation weights: `J(y) = J[idx] + t (J[idx + 1] - J[idx])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub idx: u32,
    pub t: f64,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let i = self.idx as usize;
        let (lo, hi) = (values[i], values[i + 1]);
        // `lo + (hi - lo)` can miss `hi` by an ulp, which breaks monotonicity
        if self.t == 1.0 {
            hi
        } else {
            lo + self.t * (hi - lo)
        }
    }
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::Contract(format!("grid needs finite x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n_points < 2 {
            return Err(Error::Contract(format!("grid needs at least 2 points, got {n_points}")));
        }
        if n_points > u32::MAX as usize {
            return Err(Error::Contract("grid too large".into()));
        }
        Ok(Grid { x_min, x_max, n_points })
    }

    /// Grid with `increments` equal cells.
    pub fn with_increments(x_min: f64, x_max: f64, increments: usize) -> Result<Self> {
        Self::new(x_min, x_max, increments + 1)
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let pos = ((x - self.x_min) / self.spacing()).round();
        if pos <= 0.0 {
            0
        } else {
            (pos as usize).min(self.n_points - 1)
        }
    }

    /// The grid with the same spacing extended by whole cells until it covers
    /// `[lo, hi]`, and the index of `x_min` in it.
    pub fn extended_to(&self, lo: f64, hi: f64) -> Result<(Grid, usize)> {
        let d = self.spacing();
        let cells = |gap: f64| if gap > 0.0 { (gap / d - 1e-9).ceil() as usize } else { 0 };
        let (left, right) = (cells(self.x_min - lo), cells(hi - self.x_max));
        let g = Grid::new(self.x_min - left as f64 * d, self.x_max + right as f64 * d, self.n_points + left + right)?;
        Ok((g, left))
    }

    pub fn stencil(&self, y: f64, policy: BoundaryPolicy) -> Stencil {
        let last = (self.n_points - 2) as u32;
        let pos = (y - self.x_min) / self.spacing();
        let top = (self.n_points - 1) as f64;
        if pos.is_nan() {
            return Stencil { idx: 0, t: f64::NAN };
        }
        let inside = |pos: f64| {
            let i = (pos.floor() as u32).min(last);
            Stencil { idx: i, t: pos - i as f64 }
        };
        match policy {
            BoundaryPolicy::Clamp if pos <= 0.0 => Stencil { idx: 0, t: 0.0 },
            BoundaryPolicy::Clamp if pos >= top => Stencil { idx: last, t: 1.0 },
            BoundaryPolicy::LinearExtrapolate if pos < 0.0 => Stencil { idx: 0, t: pos },
            BoundaryPolicy::LinearExtrapolate if pos >= top => Stencil { idx: last, t: pos - last as f64 },
            _ => inside(pos),
        }
    }
}

/// Values of `J` at the grid nodes, interpolated linearly in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub boundary: BoundaryPolicy,
}

impl ValueFunction {
    pub fn from_fn(grid: Grid, boundary: BoundaryPolicy, f: impl Fn(f64) -> f64) -> Self {
        ValueFunction { values: grid.nodes().into_iter().map(f).collect(), grid, boundary }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.grid.stencil(y, self.boundary).apply(&self.values)
    }

    /// Values at `grid.n_points` consecutive nodes starting at `offset`,
    /// relabelled onto `grid`.
    pub fn restrict(&self, grid: Grid, offset: usize) -> Result<ValueFunction> {
        let values = self
            .values
            .get(offset..offset + grid.n_points)
            .ok_or_else(|| Error::Contract("restriction exceeds the value curve".into()))?
            .to_vec();
        Ok(ValueFunction { grid, values, boundary: self.boundary })
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `x,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24);
        out.push_str("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.grid.node(i), v));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_nodes() {
        let g = Grid::with_increments(0.0, 5.0, 5000).unwrap();
        assert_eq!(g.n_points, 5001);
        assert_eq!(g.spacing(), 0.001);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(5000), 5.0);
        assert!(Grid::new(1.0, 1.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn interpolation_and_boundary() {
        let g = Grid::new(0.0, 4.0, 5).unwrap();
        let vf = ValueFunction::from_fn(g, BoundaryPolicy::Clamp, |x| x * x);
        assert_eq!(vf.eval(2.0), 4.0);
        assert_eq!(vf.eval(2.5), 6.5);
        assert_eq!(vf.eval(-3.0), 0.0);
        assert_eq!(vf.eval(9.0), 16.0);
        let vf = ValueFunction { boundary: BoundaryPolicy::LinearExtrapolate, ..vf };
        assert_eq!(vf.eval(5.0), 23.0);
        assert_eq!(vf.eval(-1.0), -1.0);
        assert!(vf.eval(f64::NAN).is_nan());
    }

    #[test]
    fn extension_keeps_nodes() {
        let g = Grid::with_increments(0.0, 5.0, 5000).unwrap();
        let (e, off) = g.extended_to(-8.0, 20.0).unwrap();
        assert_eq!(off, 8000);
        assert_eq!(e.n_points, 28001);
        assert!((e.node(off) - 0.0).abs() < 1e-12 && (e.node(off + 5000) - 5.0).abs() < 1e-12);
        assert!((e.spacing() - g.spacing()).abs() < 1e-15);
        assert_eq!(g.extended_to(1.0, 4.0).unwrap(), (g, 0));
        let vf = ValueFunction::from_fn(e, BoundaryPolicy::Clamp, |x| x);
        let r = vf.restrict(g, off).unwrap();
        assert_eq!(r.values.len(), 5001);
        assert!((r.eval(2.5) - 2.5).abs() < 1e-12);
        assert!(vf.restrict(g, 25000).is_err());
    }

    #[test]
    fn nearest_node() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        assert_eq!(g.nearest(0.34), 3);
        assert_eq!(g.nearest(-2.0), 0);
        assert_eq!(g.nearest(7.0), 10);
    }
}
