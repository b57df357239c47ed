use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;
use crate::market_data::{Date, DiscountCurve, ForwardCurve, InstrumentSelection, MarketSnapshot, QuoteKind, VolQuote};
use crate::vol_surface::{LocalVolSurface, ParamVector};
use crate::Result;

struct Affine {
    b: DMatrix<f64>,
    c: Vec<f64>,
}

impl LeastSquaresProblem for Affine {
    fn residual_count(&self) -> usize {
        self.b.nrows()
    }

    fn param_count(&self) -> usize {
        self.b.ncols()
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        let bx = &self.b * nalgebra::DVector::from_column_slice(x);
        Ok(bx.iter().zip(&self.c).map(|(a, c)| a + c).collect())
    }
}

fn affine() -> Affine {
    Affine {
        b: DMatrix::from_row_slice(4, 3, &[2.0, 0.5, 0.0, -1.0, 3.0, 0.2, 0.0, 1.0, 1.5, 0.3, 0.0, -2.0]),
        c: vec![1.0, -2.0, 0.5, 0.25],
    }
}

fn valuation() -> Date {
    Date::from_yyyymmdd(20220926).unwrap()
}

fn snapshot() -> MarketSnapshot {
    let v = valuation();
    let fwd = ForwardCurve::new(v, vec![(v, 7.115), (v.add_days(200), 7.05)]).unwrap();
    let disc = DiscountCurve::flat_rate(v, v.add_days(200), 0.019).unwrap();
    let mut quotes = Vec::new();
    for (tenor, days, atm) in [("1W", 7, 0.042), ("1M", 30, 0.035), ("3M", 91, 0.0385)] {
        for (kind, offset) in [
            (QuoteKind::Atmf, 0.0),
            (QuoteKind::Call25, 0.0045),
            (QuoteKind::Put25, 0.0002),
            (QuoteKind::Call10, 0.0101),
            (QuoteKind::Put10, 0.0001),
        ] {
            quotes.push(VolQuote::new(tenor, v.add_days(days), kind, atm + offset).unwrap());
        }
    }
    MarketSnapshot::new(fwd, disc, quotes).unwrap()
}

fn small_surface(snap: &MarketSnapshot) -> LocalVolSurface {
    initial_surface(snap, 6, 5).unwrap()
}

fn grid_problem() -> CalibrationProblem {
    let snap = snapshot();
    CalibrationProblem::from_market(
        &snap,
        &InstrumentSelection::all(),
        PricerBackend::grid(30),
        small_surface(&snap),
    )
    .unwrap()
}

#[test]
fn avg_error_examples() {
    assert_eq!(avg_error(&[0.0; 5]).unwrap(), 0.0);
    assert!((avg_error(&[3e-4; 59]).unwrap() - 3e-4).abs() < 1e-18);
    assert!(avg_error(&[]).is_err());
}

#[test]
fn lm_step_hand_example() {
    let w = lm_step(&DMatrix::identity(2, 2), &[1.0, 1.0], 1.0).unwrap();
    assert!((w[0] + 0.5).abs() < 1e-15 && (w[1] + 0.5).abs() < 1e-15);
}

#[test]
fn lm_step_without_damping_is_newton() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
    let f = [1.0, -2.0];
    let w = lm_step(&a, &f, 0.0).unwrap();
    let newton = a
        .clone()
        .lu()
        .solve(&(-nalgebra::DVector::from_column_slice(&f)))
        .unwrap();
    assert!((w - newton).amax() < 1e-12);
}

#[test]
fn heavy_damping_follows_the_gradient() {
    let b = affine().b;
    let f = [0.3, -0.1, 0.7, 0.2];
    let alpha = 1e9;
    let w = lm_step(&b, &f, alpha).unwrap();
    let gradient = b.tr_mul(&nalgebra::DVector::from_column_slice(&f));
    for (wi, gi) in w.iter().zip(gradient.iter()) {
        assert!((wi * alpha + gi).abs() < 1e-6 * gi.abs().max(1e-12));
    }
}

#[test]
fn checks_reject_zero_step_and_cost_increase() {
    let a = DMatrix::identity(2, 2);
    let f = [1.0, 1.0];
    assert!(!lm_checks(&[0.0, 0.0], &a, &f, &f, 1.0));
    let w = [-0.5, -0.5];
    assert!(lm_checks(&w, &a, &f, &[0.5, 0.5], 1.0));
    assert!(!lm_checks(&w, &a, &f, &[1.5, 0.0], 1.0));
}

#[test]
fn affine_jacobian_is_exact() {
    let p = affine();
    let x = [0.3, -1.0, 250.0];
    let f0 = p.residuals(&x).unwrap();
    let a = jacobian_fd(&p, &x, &f0, &SolverSettings::default()).unwrap();
    assert_eq!(a.shape(), (4, 3));
    assert!((a - &p.b).amax() < 1e-9);
}

#[test]
fn affine_problem_converges_in_few_iterations() {
    let p = affine();
    // A consistent system: shift c so that x* = (1, 2, 3) is an exact root.
    let x_star = nalgebra::DVector::from_column_slice(&[1.0, 2.0, 3.0]);
    let c: Vec<f64> = (&p.b * &x_star).iter().map(|v| -v).collect();
    let p = Affine { b: p.b, c };
    let settings = SolverSettings {
        alpha0: Some(1e-12),
        tol_f: 1e-10,
        tol_x: 1e-14,
        ..SolverSettings::default()
    };
    let out = levenberg_marquardt(&p, &[0.0, 0.0, 0.0], &settings).unwrap();
    assert_eq!(out.status, SolverStatus::ResidualTolerance);
    assert!(sum_squares(&out.residuals).sqrt() <= 1e-10);
    assert!(out.iterations <= 3, "{} iterations", out.iterations);

    // The default damping contracts by roughly 1e-3 per step.
    let settings = SolverSettings {
        alpha0: None,
        ..settings
    };
    let out = levenberg_marquardt(&p, &[0.0, 0.0, 0.0], &settings).unwrap();
    assert!(sum_squares(&out.residuals).sqrt() <= 1e-10);
    assert!(out.iterations <= 5, "{} iterations", out.iterations);
}

#[test]
fn solver_rejects_wrong_dimension() {
    assert!(levenberg_marquardt(&affine(), &[0.0; 2], &SolverSettings::default()).is_err());
}

#[test]
fn initial_surface_is_flat_in_state_at_interpolated_atm() {
    let snap = snapshot();
    let s = small_surface(&snap);
    assert_eq!(s.shape(), (6, 5));
    assert_eq!(s.c0(), 0.0385);
    for j in 0..6 {
        for k in 1..5 {
            assert_eq!(s.vol_at_node(j, k), s.vol_at_node(j, 0));
        }
    }
    assert_eq!(s.vol_at_node(0, 0), 0.042);
    let t1m = 30.0 / 365.0;
    let j = s.time_pillars().iter().position(|t| (t - t1m).abs() < 1e-15).unwrap();
    assert!((s.vol_at_node(j, 0) - 0.035).abs() < 1e-15);
}

#[test]
fn exact_initial_surface_is_a_fixed_point() {
    let p = grid_problem();
    let targets = p.model_prices(p.initial_surface()).unwrap();
    let p = p.with_targets(targets).unwrap();
    let report = calibrate(&p, &SolverSettings::default()).unwrap();
    assert!(report.iterations <= 1);
    assert!(report.avg_error <= 1e-10);
    assert_eq!(report.status, SolverStatus::ResidualTolerance);
}

#[test]
fn model_price_ratio_gives_residual() {
    let p = grid_problem();
    let y = p.model_prices(p.initial_surface()).unwrap();
    let p = p.with_targets(y.iter().map(|v| v / 1.5).collect()).unwrap();
    for f in p.residuals_for(p.initial_surface()).unwrap() {
        assert!((f - 0.5).abs() < 1e-12);
    }
}

#[test]
fn grid_calibration_reduces_error_monotonically() {
    let p = grid_problem();
    let settings = SolverSettings {
        max_iterations: 8,
        ..SolverSettings::default()
    };
    let report = calibrate(&p, &settings).unwrap();
    assert!(report.avg_error < 0.1 * report.initial_avg_error);
    let mut prev = report.initial_avg_error.powi(2) * report.errors.len() as f64;
    for cost in report.accepted_costs() {
        assert!(cost <= prev);
        prev = cost;
    }
    let recomputed = (report.errors.iter().map(|f| f * f).sum::<f64>() / report.errors.len() as f64).sqrt();
    assert!((recomputed - report.avg_error).abs() <= 1e-14);
    assert_eq!(report.instruments.len(), 15);
    assert!(report.params.as_slice().iter().all(|v| *v >= report.vol_floor));
    let csv = report.trace_csv();
    assert!(csv.starts_with("iteration,alpha,cost,step_norm,accepted\n"));
    assert_eq!(csv.lines().count(), report.trace.len() + 1);
    assert_eq!(report.accepted_steps + report.rejected_steps, report.trace.len());

    let again = calibrate(&p, &settings).unwrap();
    assert_eq!(report, again);
    let json: CalibrationReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json, report);
}

#[test]
fn monte_carlo_backend_is_deterministic_and_improves() {
    let snap = snapshot();
    let p = CalibrationProblem::from_market(
        &snap,
        &InstrumentSelection::all(),
        PricerBackend::monte_carlo(2000, 17),
        small_surface(&snap),
    )
    .unwrap();
    let settings = SolverSettings {
        max_iterations: 3,
        ..SolverSettings::default()
    };
    let a = calibrate(&p, &settings).unwrap();
    let b = calibrate(&p, &settings).unwrap();
    assert_eq!(a, b);
    assert!(a.avg_error < a.initial_avg_error);
}

#[test]
fn pillar_beyond_every_expiry_has_zero_column() {
    let snap = snapshot();
    let initial = LocalVolSurface::flat(
        vec![0.0, 0.1, 0.5, 2.0],
        LocalVolSurface::uniform_state_pillars(5),
        0.04,
        0.04,
        snap.forward.clone(),
    )
    .unwrap();
    let p =
        CalibrationProblem::from_market(&snap, &InstrumentSelection::all(), PricerBackend::grid(30), initial).unwrap();
    let x = p.initial_surface().to_params().into_vec();
    let f0 = p.residuals(&x).unwrap();
    let a = jacobian_fd(&p, &x, &f0, &SolverSettings::default()).unwrap();
    assert_eq!(a.shape(), (15, 20));
    for j in 15..20 {
        assert!(a.column(j).norm() < 1e-10, "column {j}");
    }
    assert!(a.column(0).norm() > 1e-3);
}

#[test]
fn empty_selection_is_rejected() {
    let snap = snapshot();
    let keys: Vec<String> = snap.quotes.iter().map(|q| q.key()).collect();
    let r = CalibrationProblem::from_market(
        &snap,
        &InstrumentSelection::excluding(keys),
        PricerBackend::grid(30),
        small_surface(&snap),
    );
    assert!(r.is_err());
}

#[test]
fn trial_points_are_projected_to_the_floor() {
    let p = grid_problem();
    let mut x = vec![0.04; p.param_count()];
    x[3] = -0.2;
    x[7] = 0.0;
    assert_eq!(p.project(&mut x), 2);
    assert!(p.surface_at(&x).is_ok());
    assert!(p
        .initial_surface()
        .from_params(&ParamVector::new(vec![-0.1; 30]))
        .is_err());
}

#[test]
fn unpriceable_initial_point_is_an_initialization_error() {
    struct Broken;
    impl LeastSquaresProblem for Broken {
        fn residual_count(&self) -> usize {
            1
        }
        fn param_count(&self) -> usize {
            1
        }
        fn residuals(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![f64::NAN])
        }
    }
    assert!(matches!(
        levenberg_marquardt(&Broken, &[1.0], &SolverSettings::default()),
        Err(crate::Error::Initialization(_))
    ));
}

proptest! {
    #[test]
    fn avg_error_matches_direct_summation(f in prop::collection::vec(-1.0f64..1.0, 1..80)) {
        let mut direct = 0.0;
        for v in &f {
            direct += v * v;
        }
        let expected = (direct / f.len() as f64).sqrt();
        prop_assert!((avg_error(&f).unwrap() - expected).abs() <= 1e-15);
    }

    #[test]
    fn accepted_damped_steps_pass_the_direction_check(
        entries in prop::collection::vec(-2.0f64..2.0, 12),
        f in prop::collection::vec(-1.0f64..1.0, 4),
        log_alpha in -6.0f64..6.0,
    ) {
        let a = DMatrix::from_row_slice(4, 3, &entries);
        let alpha = 10f64.powf(log_alpha);
        let w = lm_step(&a, &f, alpha).unwrap();
        prop_assume!(w.amax() > 0.0);
        let better: Vec<f64> = f.iter().map(|v| v * 0.5).collect();
        prop_assert!(lm_checks(w.as_slice(), &a, &f, &better, alpha));
    }
}
