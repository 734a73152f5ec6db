use super::grid::Grid;
use super::operator::{price_with, EngineOptions, PricingResult};
use crate::error::{Error, Result};
use crate::model::{CoefficientBand, ControlGrid};
use crate::payoff::PayoffSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub n_steps: usize,
    pub price: f64,
    /// `|price - price at the finest h|`
    pub diff: f64,
    /// Empirical convergence order from this row and the two before it.
    pub order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `|p_i - p_{i+1}|` for consecutive rows.
    pub successive_gaps: Vec<f64>,
    /// Indices `i` where the gap `|p_i - p_{i+1}|` exceeds the one before it.
    pub non_cauchy: Vec<usize>,
    /// Distance from `x0` to the nearest grid end in units of `sqrt(max a_upper T)`.
    pub boundary_distance: f64,
    pub results: Vec<PricingResult>,
}

impl SweepReport {
    pub fn gaps_decreasing(&self) -> bool {
        self.non_cauchy.is_empty()
    }

    /// CSV with columns `h,N,price,diff,order`; an undefined order is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,N,price,diff,order\n");
        for r in &self.rows {
            let order = r.order.map(|q| q.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.h, r.n_steps, r.price, r.diff, order));
        }
        out
    }
}

/// Solves `(h0^q - h1^q) / (h1^q - h2^q) = (p0 - p1) / (p1 - p2)` for `q`,
/// the order under the model `p(h) = p* + c h^q`.
pub fn order_estimate(h: [f64; 3], p: [f64; 3]) -> Option<f64> {
    let d0 = p[0] - p[1];
    let d1 = p[1] - p[2];
    if d0 == 0.0 || d1 == 0.0 || !(d0 / d1).is_finite() {
        return None;
    }
    let target = d0 / d1;
    if target <= 0.0 {
        return None;
    }
    let f = |q: f64| (h[0].powf(q) - h[1].powf(q)) / (h[1].powf(q) - h[2].powf(q)) - target;
    let (mut lo, mut hi) = (1e-3, 10.0);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn sweep(
    band: &CoefficientBand,
    payoff: &PayoffSpec,
    x0: f64,
    h_list: &[f64],
    grid: &Grid,
    lambda_grid: &ControlGrid,
    opts: &EngineOptions,
) -> Result<SweepReport> {
    if h_list.len() < 3 {
        return Err(Error::Contract(format!("a sweep needs at least 3 step sizes, got {}", h_list.len())));
    }
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Contract("sweep step sizes must be strictly decreasing".into()));
    }
    let results = h_list
        .iter()
        .map(|&h| price_with(band, payoff, x0, h, grid, lambda_grid, opts))
        .collect::<Result<Vec<_>>>()?;
    let prices: Vec<f64> = results.iter().map(|r| r.price).collect();
    let finest = *prices.last().expect("non-empty");
    let rows = results
        .iter()
        .enumerate()
        .map(|(i, r)| SweepRow {
            h: r.h,
            n_steps: r.n_steps,
            price: r.price,
            diff: (r.price - finest).abs(),
            order: (i >= 2).then(|| order_estimate([h_list[i - 2], h_list[i - 1], h_list[i]], [prices[i - 2], prices[i - 1], prices[i]])).flatten(),
        })
        .collect();
    let successive_gaps: Vec<f64> = prices.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let non_cauchy = (1..successive_gaps.len()).filter(|&i| successive_gaps[i] > successive_gaps[i - 1]).collect();
    let reach = (band.max_variance_on((grid.x_min, grid.x_max), 1001) * payoff.horizon).sqrt();
    let boundary_distance = (x0 - grid.x_min).min(grid.x_max - x0) / reach;
    Ok(SweepReport { rows, successive_gaps, non_cauchy, boundary_distance, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::ScalarFn;

    #[test]
    fn order_of_exact_power_law() {
        let h = [0.1, 0.05, 0.02];
        for q in [0.5, 1.0, 2.0] {
            let p = h.map(|h: f64| 3.0 + 0.7 * h.powf(q));
            let est = order_estimate(h, p).unwrap();
            assert!((est - q).abs() < 1e-9, "{est} vs {q}");
        }
        assert_eq!(order_estimate(h, [1.0, 1.0, 1.0]), None);
        assert_eq!(order_estimate(h, [1.0, 2.0, 1.0]), None);
    }

    #[test]
    fn constant_claim_sweep() {
        let grid = Grid::new(0.0, 5.0, 201).unwrap();
        let payoff = PayoffSpec::terminal(ScalarFn::constant(4.0), 1.0);
        let lg = ControlGrid::new(1, 9).unwrap();
        let rep = sweep(&CoefficientBand::cev_cutoff(), &payoff, 1.0, &[0.1, 0.05, 0.025], &grid, &lg, &EngineOptions::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.price == 4.0 && r.diff == 0.0 && r.order.is_none()));
        assert!(rep.gaps_decreasing());
        assert!(rep.to_csv().starts_with("h,N,price,diff,order\n0.1,10,4,0,\n"));
    }

    #[test]
    fn rejects_bad_h_lists() {
        let grid = Grid::new(0.0, 5.0, 21).unwrap();
        let payoff = PayoffSpec::terminal(ScalarFn::Zero, 1.0);
        let lg = ControlGrid::new(1, 3).unwrap();
        let band = CoefficientBand::cev_cutoff();
        let o = EngineOptions::default();
        assert!(sweep(&band, &payoff, 1.0, &[0.1, 0.05], &grid, &lg, &o).is_err());
        assert!(sweep(&band, &payoff, 1.0, &[0.1, 0.2, 0.05], &grid, &lg, &o).is_err());
    }
}
