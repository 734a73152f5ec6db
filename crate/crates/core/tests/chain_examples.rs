use robust_mca::chain::{self, FeedbackControl};
use robust_mca::engine::{self, BoundaryPolicy, EngineOptions, Grid};
use robust_mca::func::ScalarFn;
use robust_mca::kernels::{KernelKind, KernelSpec};
use robust_mca::model::{CoefficientBand, ControlGrid, ControlPoint};
use robust_mca::payoff::PayoffSpec;

fn band_1_4() -> CoefficientBand {
    CoefficientBand::constant(0.0, 0.0, 1.0, 4.0, 4.0)
}

#[test]
fn symmetric_chain_moves_by_the_selected_volatility() {
    let h = 1e-3;
    let k = KernelSpec::new(KernelKind::SymmetricRademacher, band_1_4(), h).unwrap();
    let control = FeedbackControl::Constant(ControlPoint::scalar(1.0).unwrap());
    let path = chain::simulate(&k, &control, 0.0, 20_000, 5).unwrap();
    let step = 2.0 * h.sqrt();
    let mut ups = 0;
    for w in path.y.windows(2) {
        let dz = w[1][0] - w[0][0];
        let dx = w[1][1] - w[0][1];
        assert!((dz.abs() - h.sqrt()).abs() < 1e-12);
        assert!((dx.abs() - step).abs() < 1e-9);
        assert_eq!(dz > 0.0, dx > 0.0);
        ups += usize::from(dx > 0.0);
    }
    let freq = ups as f64 / 20_000.0;
    // 4 standard deviations of a fair coin over 20000 flips
    assert!((freq - 0.5).abs() < 4.0 * 0.5 / 20_000f64.sqrt(), "{freq}");
}

#[test]
fn crr_chain_drifts_between_coin_flips() {
    let h = 0.01;
    let band = CoefficientBand::constant(-1.0, 1.0, 1.0, 4.0, 4.0);
    let k = KernelSpec::new(KernelKind::RobustCrr, band, h).unwrap();
    let control = FeedbackControl::Constant(ControlPoint::new(&[1.0, 0.0]).unwrap());
    let path = chain::simulate(&k, &control, 0.5, 400, 9).unwrap();
    for w in path.y.windows(2) {
        let dz = w[1][0] - w[0][0];
        let dx = w[1][1] - w[0][1];
        // b = 1, σ = 1: dx = h ± √h with the sign of the driver step
        assert!((dx - (h + dz)).abs() < 1e-12);
    }
    let t = chain::interpolate(&path);
    assert_eq!(t.eval(0.37).unwrap(), path.y[37]);
    let mid = t.eval(0.375).unwrap();
    assert!((mid[1] - 0.5 * (path.y[37][1] + path.y[38][1])).abs() < 1e-12);
    assert!(t.eval(4.01).is_err());
}

#[test]
fn greedy_control_takes_the_upper_band_for_a_strictly_convex_claim() {
    let payoff = PayoffSpec::terminal(ScalarFn::PowerClamp { lo: 0.0, hi: 100.0, p: 2.0 }, 1.0);
    let grid = Grid::new(-6.0, 10.0, 1601).unwrap();
    let lg = ControlGrid::new(1, 9).unwrap();
    let opts = EngineOptions { boundary: BoundaryPolicy::LinearExtrapolate, record_policy: true };
    let r = engine::price_with(&band_1_4(), &payoff, 2.0, 0.05, &grid, &lg, &opts).unwrap();
    let policy = r.policy.as_ref().unwrap();
    assert_eq!(policy.argmax.len(), 20);
    for row in &policy.argmax {
        let (a, b) = (grid.nearest(1.0), grid.nearest(4.0));
        assert!(row[a..=b].iter().all(|&j| j == 8));
    }
    let FeedbackControl::StateLookup { table, .. } = chain::extract_greedy_control(&r).unwrap() else {
        panic!("greedy control is a state lookup")
    };
    assert_eq!(&table, &policy.argmax);
}

#[test]
fn frozen_control_simulation_matches_its_recursion() {
    let h = 0.02;
    let payoff = PayoffSpec::terminal(ScalarFn::Call { strike: 0.0 }, 1.0);
    let grid = Grid::new(-12.0, 12.0, 2401).unwrap();
    let opts = EngineOptions { boundary: BoundaryPolicy::LinearExtrapolate, record_policy: false };
    let dp = engine::price_frozen(&band_1_4(), &payoff, 0.0, h, &grid, 1.0, &opts).unwrap().price;
    let k = KernelSpec::new(KernelKind::SymmetricRademacher, band_1_4(), h).unwrap();
    let control = FeedbackControl::Constant(ControlPoint::scalar(1.0).unwrap());
    let mc = chain::monte_carlo_value(&k, &control, &payoff, 0.0, 40_000, 3, None).unwrap();
    assert!((mc.estimate - dp).abs() <= 4.0 * mc.std_error + 0.005, "{mc:?} vs {dp}");

    // the worst case dominates every constant control
    let sup = engine::price_with(&band_1_4(), &payoff, 0.0, h, &grid, &ControlGrid::new(1, 9).unwrap(), &opts).unwrap();
    let low = FeedbackControl::Constant(ControlPoint::scalar(0.0).unwrap());
    let e = chain::monte_carlo_value(&k, &low, &payoff, 0.0, 40_000, 4, None).unwrap();
    assert!(e.estimate < sup.price - 0.3);
}

#[test]
fn controls_must_match_the_kernel() {
    let k = KernelSpec::new(KernelKind::RobustCrr, band_1_4(), 0.01).unwrap();
    let scalar = FeedbackControl::Constant(ControlPoint::scalar(0.5).unwrap());
    assert!(chain::simulate(&k, &scalar, 0.0, 10, 1).is_err());
    let grid = Grid::new(0.0, 1.0, 11).unwrap();
    let bad = FeedbackControl::StateLookup { grid, controls: ControlGrid::new(2, 3).unwrap(), table: vec![vec![9; 11]] };
    assert!(chain::simulate(&k, &bad, 0.0, 10, 1).is_err());
}
