//! Two-atom transition kernels of the approximating chains and their moment
//! diagnostics.
//!
//! Every kernel acts on the pair `x = (driver, state)` and moves it to one of
//! two atoms. The kernels differ in how the control `λ ∈ [0, 1]^k` shapes the
//! jump sizes and probabilities:
//!
//! | kind                   | k | atoms                                                   |
//! |------------------------|---|---------------------------------------------------------|
//! | `RobustCrr`            | 2 | `x + (±√h, b h ± σ √h)`, weight ½ each                  |
//! | `RobustBinomial`       | 4 | `x + (√h v, u_h)` w.p. `p`, `x + (-√h / v, d_h)` w.p. `1-p` |
//! | `MartingaleBinomial`   | 4 | zero-mean re-weighting of the binomial jumps            |
//! | `SymmetricRademacher`  | 1 | `x + (±√h, ±√h σ)`, weight ½ each, no drift             |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefficientBand, ControlGrid, ControlPoint, LimitCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    RobustCrr,
    RobustBinomial,
    MartingaleBinomial,
    SymmetricRademacher,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [
        KernelKind::RobustCrr,
        KernelKind::RobustBinomial,
        KernelKind::MartingaleBinomial,
        KernelKind::SymmetricRademacher,
    ];

    /// Dimension `k` of the action space `[0, 1]^k`.
    pub fn control_dim(self) -> usize {
        match self {
            KernelKind::RobustCrr => 2,
            KernelKind::RobustBinomial | KernelKind::MartingaleBinomial => 4,
            KernelKind::SymmetricRademacher => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::RobustCrr => "robust_crr",
            KernelKind::RobustBinomial => "robust_binomial",
            KernelKind::MartingaleBinomial => "martingale_binomial",
            KernelKind::SymmetricRademacher => "symmetric_rademacher",
        }
    }
}

/// Distribution of the innovation `ξ` in the CRR kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Rademacher,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub band: CoefficientBand,
    pub h: f64,
    pub innovation: Innovation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// `(driver, state)`
    pub point: [f64; 2],
    pub weight: f64,
}

/// One member of the kernel family at a fixed `(λ, x)`, as a finite measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSupport {
    pub atoms: [Atom; 2],
}

impl WeightedSupport {
    /// Weights strictly positive and summing to one within `1e-12`.
    pub fn is_valid(&self) -> bool {
        let sum: f64 = self.atoms.iter().map(|a| a.weight).sum();
        self.atoms.iter().all(|a| a.weight > 0.0) && (sum - 1.0).abs() <= 1e-12
    }

    /// `Σ w (atom - x)`
    pub fn first_moment(&self, x: [f64; 2]) -> [f64; 2] {
        let mut m = [0.0; 2];
        for a in &self.atoms {
            m[0] += a.weight * (a.point[0] - x[0]);
            m[1] += a.weight * (a.point[1] - x[1]);
        }
        m
    }
}

/// Truncated moments of one kernel member and their distance to the limit
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub b_h: [f64; 2],
    pub a_h: [[f64; 2]; 2],
    pub limit: LimitCoefficients,
    /// `(1/h) Π_h(λ, x, {‖y - x‖ >= 1})`, the mass dropped by the truncation.
    pub tail_mass_unit: f64,
    /// Euclidean norm of `b_h - b̄`.
    pub drift_residual: f64,
    /// Frobenius norm of `a_h - ā`.
    pub diffusion_residual: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, band: CoefficientBand, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Contract(format!("time step h must be positive, got {h}")));
        }
        Ok(KernelSpec { kind, band, h, innovation: Innovation::Rademacher })
    }

    /// Conservative step bound for the martingale kernel: `√h C^{3/2} < √(1/C)`,
    /// i.e. `h < C^{-4}`, which guarantees `u_h > 0 > d_h` everywhere.
    pub fn h_max(&self) -> f64 {
        martingale_h_max(self.band.bound_c)
    }

    fn check_control(&self, lambda: &ControlPoint) -> Result<()> {
        let k = self.kind.control_dim();
        if lambda.dim() != k {
            return Err(Error::Contract(format!(
                "{} kernel needs a control of dimension {k}, got {}",
                self.kind.name(),
                lambda.dim()
            )));
        }
        Ok(())
    }

    /// Up/down state jumps `(u_h, d_h)` of the binomial kernels.
    fn binomial_jumps(&self, lambda: &ControlPoint, state: f64) -> (f64, f64, f64, f64) {
        let h = self.h;
        let sqrt_h = h.sqrt();
        let s_up = self.band.sigma(lambda.get(2), state);
        let s_down = self.band.sigma(lambda.get(3), state);
        let u = h * self.band.drift(lambda.get(0), state) + sqrt_h * s_up;
        let d = h * self.band.drift(lambda.get(1), state) - sqrt_h * s_down;
        (u, d, s_up, s_down)
    }

    /// The two atoms and weights of `Π_h(λ, x, ·)`.
    pub fn support(&self, lambda: &ControlPoint, x: [f64; 2]) -> Result<WeightedSupport> {
        let mut inc = self.increments(lambda, x[1])?;
        for a in &mut inc.atoms {
            a.point = [x[0] + a.point[0], x[1] + a.point[1]];
        }
        Ok(inc)
    }

    /// Atoms of `Π_h(λ, x, ·)` as displacements `y - x`; they depend on the
    /// state `x_2` only.
    pub fn increments(&self, lambda: &ControlPoint, s: f64) -> Result<WeightedSupport> {
        self.check_control(lambda)?;
        let h = self.h;
        let sqrt_h = h.sqrt();
        let atoms = match self.kind {
            KernelKind::SymmetricRademacher => {
                let step = sqrt_h * self.band.sigma(lambda.get(0), s);
                [
                    Atom { point: [sqrt_h, step], weight: 0.5 },
                    Atom { point: [-sqrt_h, -step], weight: 0.5 },
                ]
            }
            KernelKind::RobustCrr => {
                let b = self.band.drift(lambda.get(0), s);
                let sigma = self.band.sigma(lambda.get(1), s);
                let mean = b * h;
                let step = sigma * sqrt_h;
                [
                    Atom { point: [sqrt_h, mean + step], weight: 0.5 },
                    Atom { point: [-sqrt_h, mean - step], weight: 0.5 },
                ]
            }
            KernelKind::RobustBinomial => {
                let (u, d, s_up, s_down) = self.binomial_jumps(lambda, s);
                let p = s_down / (s_down + s_up);
                let v = (s_up / s_down).sqrt();
                [
                    Atom { point: [sqrt_h * v, u], weight: p },
                    Atom { point: [-sqrt_h / v, d], weight: 1.0 - p },
                ]
            }
            KernelKind::MartingaleBinomial => {
                let h_max = self.h_max();
                let (u, d, s_up, s_down) = self.binomial_jumps(lambda, s);
                if !(u > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "martingale binomial needs u_h > 0, got u_h = {u} at x = {s} (h = {h}, h_max = {h_max})"
                    )));
                }
                if !(d < 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "martingale binomial needs d_h < 0, got d_h = {d} at x = {s} (h = {h}, h_max = {h_max})"
                    )));
                }
                if h >= h_max {
                    return Err(Error::InvalidKernel(format!(
                        "martingale binomial needs h < h_max = {h_max} so that u_h > 0 > d_h holds everywhere, got h = {h}"
                    )));
                }
                let v = (s_up * s_down).sqrt();
                [
                    Atom { point: [-v * h / d, u], weight: d / (d - u) },
                    Atom { point: [-v * h / u, d], weight: u / (u - d) },
                ]
            }
        };
        Ok(WeightedSupport { atoms })
    }

    /// Limit drift `b(λ, x)` and volatility `σ(λ, x)` the kernel's scaled
    /// moments converge to as `h ↘ 0`.
    pub fn limit_coefficients(&self, lambda: &ControlPoint, state: f64) -> LimitCoefficients {
        let band = &self.band;
        match self.kind {
            KernelKind::SymmetricRademacher => {
                LimitCoefficients { drift: 0.0, vol: band.sigma(lambda.get(0), state) }
            }
            KernelKind::RobustCrr => LimitCoefficients {
                drift: band.drift(lambda.get(0), state),
                vol: band.sigma(lambda.get(1), state),
            },
            KernelKind::RobustBinomial => {
                let s_up = band.sigma(lambda.get(2), state);
                let s_down = band.sigma(lambda.get(3), state);
                let p = s_down / (s_down + s_up);
                LimitCoefficients {
                    drift: p * band.drift(lambda.get(0), state) + (1.0 - p) * band.drift(lambda.get(1), state),
                    vol: (s_up * s_down).sqrt(),
                }
            }
            KernelKind::MartingaleBinomial => {
                let s_up = band.sigma(lambda.get(2), state);
                let s_down = band.sigma(lambda.get(3), state);
                LimitCoefficients { drift: 0.0, vol: (s_up * s_down).sqrt() }
            }
        }
    }

    /// Scaled moments restricted to the closed unit ball around `x`.
    pub fn approx_moments(&self, lambda: &ControlPoint, x: [f64; 2]) -> Result<MomentReport> {
        let support = self.increments(lambda, x[1])?;
        let h = self.h;
        let mut b_h = [0.0; 2];
        let mut a_h = [[0.0; 2]; 2];
        let mut outside = 0.0;
        for atom in &support.atoms {
            let dx = atom.point;
            let dist = dx[0].hypot(dx[1]);
            if dist >= 1.0 {
                outside += atom.weight;
            }
            if dist > 1.0 {
                continue;
            }
            for i in 0..2 {
                b_h[i] += atom.weight * dx[i];
                for j in 0..2 {
                    a_h[i][j] += atom.weight * dx[i] * dx[j];
                }
            }
        }
        for (b, row) in b_h.iter_mut().zip(&mut a_h) {
            *b /= h;
            for a in row {
                *a /= h;
            }
        }
        let limit = self.limit_coefficients(lambda, x[1]);
        let bar_b = limit.extended_drift();
        let bar_a = limit.extended_diffusion();
        let drift_residual = (b_h[0] - bar_b[0]).hypot(b_h[1] - bar_b[1]);
        let mut sq = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                sq += (a_h[i][j] - bar_a[i][j]).powi(2);
            }
        }
        Ok(MomentReport {
            b_h,
            a_h,
            limit,
            tail_mass_unit: outside / h,
            drift_residual,
            diffusion_residual: sq.sqrt(),
        })
    }

    /// `(1/h) max Π_h(λ, x, {‖y - x‖ >= ε})` over the probe lattice
    /// `λ_grid × x_grid`.
    pub fn tail_mass(&self, eps: f64, lambda_grid: &ControlGrid, x_grid: &[[f64; 2]]) -> Result<f64> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Contract(format!("tail mass needs a finite ε > 0, got {eps}")));
        }
        if x_grid.is_empty() {
            return Err(Error::Contract("tail mass needs a nonempty state probe set".into()));
        }
        let mut worst = 0.0_f64;
        for lambda in lambda_grid.points() {
            for &x in x_grid {
                let support = self.increments(&lambda, x[1])?;
                let mass: f64 = support
                    .atoms
                    .iter()
                    .filter(|a| a.point[0].hypot(a.point[1]) >= eps)
                    .map(|a| a.weight)
                    .sum();
                worst = worst.max(mass);
            }
        }
        Ok(worst / self.h)
    }

    /// Upper bound on `‖atom - x‖` over all controls and states, from the
    /// band constant `C` alone.
    pub fn jump_bound(&self) -> f64 {
        jump_bound(self.kind, self.band.bound_c, self.h)
    }
}

pub fn martingale_h_max(bound_c: f64) -> f64 {
    bound_c.powi(-4)
}

/// Upper bound on the jump length of `kind` at step `h` for a band with constant `C`.
pub fn jump_bound(kind: KernelKind, bound_c: f64, h: f64) -> f64 {
    let c = bound_c;
    let sqrt_h = h.sqrt();
    let state = h * c + (h * c).sqrt();
    match kind {
        KernelKind::SymmetricRademacher => (h + h * c).sqrt(),
        KernelKind::RobustCrr => sqrt_h.hypot(state),
        KernelKind::RobustBinomial => (h * c).sqrt().hypot(state),
        KernelKind::MartingaleBinomial => {
            // |d_h| >= √h C^{-1/2} - h C and v <= √C
            let denom = 1.0 - c.powf(1.5) * sqrt_h;
            if denom <= 0.0 {
                return f64::INFINITY;
            }
            (c * sqrt_h / denom).hypot(state)
        }
    }
}

/// Largest `h` (up to 1) with `jump_bound(kind, C, h) < ε`, so that the tail
/// functional `Δ_h^ε` vanishes for every step at or below it.
pub fn tail_free_threshold(kind: KernelKind, bound_c: f64, eps: f64) -> f64 {
    let mut hi = 1.0_f64;
    if kind == KernelKind::MartingaleBinomial {
        hi = hi.min(martingale_h_max(bound_c));
    }
    if jump_bound(kind, bound_c, hi) < eps && kind != KernelKind::MartingaleBinomial {
        return hi;
    }
    let mut lo = 0.0_f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if jump_bound(kind, bound_c, mid) < eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One row of the moment-convergence report.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub sup_res_b: f64,
    pub sup_res_a: f64,
    /// `(ε, Δ_h^ε)` pairs.
    pub tail: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kind: KernelKind,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln sup_res_a` against `ln h`, when all residuals are positive.
    pub slope_a: Option<f64>,
    pub slope_b: Option<f64>,
    pub flags: Vec<String>,
}

impl ConvergenceReport {
    /// CSV with columns `h,sup_res_b,sup_res_a,eps,delta_h_eps`, one line per `(h, ε)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,sup_res_b,sup_res_a,eps,delta_h_eps\n");
        for row in &self.rows {
            for (eps, delta) in &row.tail {
                out.push_str(&format!("{},{},{},{},{}\n", row.h, row.sup_res_b, row.sup_res_a, eps, delta));
            }
        }
        out
    }
}

/// Sweeps `h` and reports the sup over the probe lattice of the moment
/// residuals and of `Δ_h^ε`. Steps at which the kernel cannot be realized are
/// skipped and flagged.
pub fn verify_convergence<F>(
    spec_for: F,
    h_list: &[f64],
    lambda_grid: &ControlGrid,
    x_grid: &[[f64; 2]],
    eps_list: &[f64],
) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> Result<KernelSpec>,
{
    if h_list.len() < 2 || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Contract("h_list must be strictly decreasing with at least 2 entries".into()));
    }
    if x_grid.is_empty() {
        return Err(Error::Contract("verify_convergence needs state probes".into()));
    }
    let mut rows = Vec::with_capacity(h_list.len());
    let mut flags = Vec::new();
    let mut kind = None;
    'steps: for &h in h_list {
        let spec = spec_for(h)?;
        kind = Some(spec.kind);
        let (mut sup_b, mut sup_a) = (0.0_f64, 0.0_f64);
        for lambda in lambda_grid.points() {
            for &x in x_grid {
                match spec.approx_moments(&lambda, x) {
                    Ok(m) => {
                        sup_b = sup_b.max(m.drift_residual);
                        sup_a = sup_a.max(m.diffusion_residual);
                    }
                    Err(Error::InvalidKernel(msg)) => {
                        flags.push(format!("h = {h}: kernel invalid, skipped ({msg})"));
                        continue 'steps;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let mut tail = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            tail.push((eps, spec.tail_mass(eps, lambda_grid, x_grid)?));
        }
        rows.push(ConvergenceRow { h, sup_res_b: sup_b, sup_res_a: sup_a, tail });
    }

    let slope = |sel: fn(&ConvergenceRow) -> f64| -> Option<f64> {
        if rows.len() < 2 || rows.iter().any(|r| !(sel(r) > 0.0)) {
            return None;
        }
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.h.ln(), sel(r).ln())).collect();
        Some(ls_slope(&pts))
    };
    let slope_a = slope(|r| r.sup_res_a);
    let slope_b = slope(|r| r.sup_res_b);

    for (name, sel) in [
        ("sup_res_b", (|r: &ConvergenceRow| r.sup_res_b) as fn(&ConvergenceRow) -> f64),
        ("sup_res_a", |r: &ConvergenceRow| r.sup_res_a),
    ] {
        let vals: Vec<f64> = rows.iter().map(sel).collect();
        if vals.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-14) {
            flags.push(format!("{name} is not monotone in h"));
        }
        if let (Some(first), Some(last)) = (vals.first(), vals.last()) {
            if *first > 1e-12 && *last > 0.5 * first {
                flags.push(format!("{name} does not vanish: {first} -> {last}"));
            }
        }
    }
    if let Some(last) = rows.last() {
        for (eps, delta) in &last.tail {
            if *delta > 0.0 {
                flags.push(format!("Δ_h^{eps} = {delta} is still positive at the finest h = {}", last.h));
            }
        }
    }
    Ok(ConvergenceReport {
        kind: kind.expect("h_list is nonempty"),
        rows,
        slope_a,
        slope_b,
        flags,
    })
}

pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
