use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::market_data::{AmericanOption, CallPut, Date, DiscountCurve, ForwardCurve, Vanilla};
use crate::reference_pricing::black_scholes_price;
use crate::vol_surface::LocalVolSurface;

fn valuation() -> Date {
    Date::from_yyyymmdd(20220926).unwrap()
}

fn forward() -> Arc<ForwardCurve> {
    let v = valuation();
    Arc::new(
        ForwardCurve::new(
            v,
            vec![
                (v, 7.115),
                (v.add_days(30), 7.106),
                (v.add_days(182), 7.06),
                (v.add_days(400), 7.0),
            ],
        )
        .unwrap(),
    )
}

fn discount() -> DiscountCurve {
    DiscountCurve::flat_rate(valuation(), valuation().add_days(400), 0.019).unwrap()
}

fn flat(vol: f64) -> LocalVolSurface {
    LocalVolSurface::flat(
        vec![0.0, 1.0],
        LocalVolSurface::uniform_state_pillars(11),
        vol,
        0.043,
        forward(),
    )
    .unwrap()
}

fn skewed() -> LocalVolSurface {
    let t = vec![0.0, 0.1, 0.5, 1.0];
    let vols = (0..4)
        .map(|j| {
            (0..11)
                .map(|k| 0.035 + 0.002 * j as f64 + 0.004 * (k as f64 / 10.0 - 0.3).powi(2) * 10.0)
                .collect()
        })
        .collect();
    LocalVolSurface::new(t, LocalVolSurface::uniform_state_pillars(11), vols, 0.043, forward()).unwrap()
}

fn field(surface: &LocalVolSurface, horizon_days: i64, half_width: usize) -> GridField {
    let grid = build_time_grid(valuation(), &[valuation().add_days(horizon_days)], 3).unwrap();
    GridField::build(&grid, surface, &forward(), half_width, true).unwrap()
}

#[test]
fn state_grid_shape() {
    let grid = build_time_grid(valuation(), &[valuation().add_days(30)], 3).unwrap();
    let surface = flat(0.05);
    let f = build_state_grid(&grid, &surface, 50).unwrap();
    assert_eq!(f.slice(0).node_count(), 1);
    assert_eq!(f.slice(0).variance, 0.0);
    for n in 1..grid.len() {
        let s = f.slice(n);
        assert_eq!(s.node_count(), 101);
        assert!((s.variance - 0.05f64.powi(2) * grid.times()[n]).abs() < 1e-15);
        assert_eq!(s.coords[50], 0.0);
        assert!((s.coords[100] - 5.0 * s.variance.sqrt()).abs() < 1e-15);
        assert!((s.coords[0] + s.coords[100]).abs() < 1e-15);
    }
    assert!(build_state_grid(&grid, &surface, 0).is_err());
}

#[test]
fn root_slice_is_spot() {
    let f = field(&skewed(), 30, 50);
    assert_eq!(f.slice(0).states, vec![7.115]);
    assert_eq!(f.slice(0).arrival, vec![1.0]);
}

#[test]
fn martingale_and_normalisation_on_skewed_surface() {
    let f = field(&skewed(), 365, 50);
    let fwd = forward();
    for (n, s) in f.slices().iter().enumerate() {
        let sum_q: f64 = s.arrival.iter().sum();
        assert!((sum_q - 1.0).abs() < 1e-12, "slice {n}: {sum_q}");
        let mean: f64 = s.arrival.iter().zip(&s.states).map(|(q, x)| q * x).sum();
        let target = fwd.forward_at(f.time_grid().dates()[n]).unwrap();
        assert!((mean / target - 1.0).abs() < 1e-10, "slice {n}");
    }
    let diag = f.diagnostics(&fwd).unwrap();
    assert_eq!(diag.len(), f.slices().len());
    assert!(f.diagnostics_csv(&fwd).unwrap().starts_with("slice,date"));
}

#[test]
fn tiny_vol_follows_forward_curve() {
    let v = valuation();
    let flat_fwd = ForwardCurve::flat(v, v.add_days(60), 7.1).unwrap();
    let surface = LocalVolSurface::flat(vec![0.0], vec![0.0, 1.0], 1e-6, 0.043, Arc::new(flat_fwd.clone())).unwrap();
    let grid = build_time_grid(v, &[v.add_days(60)], 3).unwrap();
    let f = GridField::build(&grid, &surface, &flat_fwd, 50, true).unwrap();
    for s in f.slices() {
        assert!((s.drift - 7.1f64.ln()).abs() < 1e-9);
    }
}

#[test]
fn tiny_vol_row_concentrates_on_nearest_node() {
    let f = field(&flat(0.05), 30, 50);
    let target = f.slice(3);
    let x = target.coords[60] + 0.2 * target.dx;
    let (row, clamps) = transition_row_onto(x, 1e-9, 3.0 / 365.0, target);
    assert_eq!(clamps, 0);
    let at = row.entries.iter().find(|(j, _)| *j == 60).unwrap().1;
    assert!((at - (1.0 - 0.04)).abs() < 1e-6);
    let (row, _) = transition_row_onto(target.coords[60], 1e-12, 3.0 / 365.0, target);
    let at = row.entries.iter().find(|(j, _)| *j == 60).unwrap().1;
    assert!((at - 1.0).abs() < 1e-12);
}

#[test]
fn center_row_is_symmetric() {
    let f = field(&flat(0.05), 30, 50);
    let surface = flat(0.05);
    // center node of slice 5 onto slice 6, constant vol
    let row = f.transition_row(&surface, 5, 50).unwrap();
    let weight = |j: usize| row.entries.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1);
    for d in 0..=50 {
        assert!((weight(50 + d) - weight(50 - d)).abs() < 1e-14);
    }
}

#[test]
fn edge_nodes_use_clamped_stencil() {
    let f = field(&flat(0.05), 30, 10);
    let target = f.slice(5);
    let (row, clamps) = transition_row_onto(target.coords[20] + 3.0 * target.dx, 0.05, 3.0 / 365.0, target);
    assert!(clamps > 0);
    assert!((row.sum() - 1.0).abs() < 1e-12);
    assert!(row.entries.iter().all(|(j, _)| *j <= 20));
}

#[test]
fn flat_vol_european_matches_black_scholes() {
    let surface = flat(0.043);
    let v = valuation();
    let expiries = [30, 182, 365];
    let grid = build_time_grid(v, &expiries.map(|d| v.add_days(d)), 3).unwrap();
    let f = GridField::build(&grid, &surface, &forward(), 100, false).unwrap();
    let disc = discount();
    for days in expiries {
        let expiry = v.add_days(days);
        let fwd = forward().forward_at(expiry).unwrap();
        for strike in [fwd * 0.98, fwd, fwd * 1.02] {
            for cp in [CallPut::Call, CallPut::Put] {
                let grid_price = price_european_on_grid(
                    &f,
                    &[Vanilla {
                        expiry,
                        strike,
                        call_put: cp,
                    }],
                    &disc,
                )
                .unwrap()[0];
                let bs = black_scholes_price(fwd, strike, 0.043, days as f64 / 365.0, disc.df_at(expiry).unwrap(), cp)
                    .unwrap();
                // 1 bp of notional, notional in units of spot
                assert!(
                    (grid_price - bs).abs() / 7.115 < 1e-4,
                    "{days}d K={strike} {cp:?}: {grid_price} vs {bs}"
                );
            }
        }
    }
}

#[test]
fn zero_vol_european_is_discounted_intrinsic() {
    let v = valuation();
    let surface = LocalVolSurface::flat(vec![0.0], vec![0.0, 1.0], 1e-6, 0.043, forward()).unwrap();
    let grid = build_time_grid(v, &[v.add_days(90)], 3).unwrap();
    let f = GridField::build(&grid, &surface, &forward(), 50, false).unwrap();
    let expiry = v.add_days(90);
    let fwd = forward().forward_at(expiry).unwrap();
    let df = discount().df_at(expiry).unwrap();
    let p = price_european_on_grid(
        &f,
        &[Vanilla {
            expiry,
            strike: 7.0,
            call_put: CallPut::Call,
        }],
        &discount(),
    )
    .unwrap()[0];
    assert!((p - df * (fwd - 7.0)).abs() < 1e-9);
}

#[test]
fn put_call_parity_on_grid() {
    let f = field(&skewed(), 200, 50);
    let expiry = valuation().add_days(200);
    let fwd = forward().forward_at(expiry).unwrap();
    let df = discount().df_at(expiry).unwrap();
    for strike in [6.8, 7.0, 7.06, 7.3] {
        let prices = price_european_on_grid(
            &f,
            &[
                Vanilla {
                    expiry,
                    strike,
                    call_put: CallPut::Call,
                },
                Vanilla {
                    expiry,
                    strike,
                    call_put: CallPut::Put,
                },
            ],
            &discount(),
        )
        .unwrap();
        assert!((prices[0] - prices[1] - df * (fwd - strike)).abs() < 1e-10);
    }
}

#[test]
fn off_grid_expiry_is_an_error() {
    let f = field(&flat(0.05), 30, 20);
    let bad = Vanilla {
        expiry: valuation().add_days(31),
        strike: 7.0,
        call_put: CallPut::Call,
    };
    assert!(price_european_on_grid(&f, &[bad], &discount()).is_err());
}

fn american(start: i64, end: i64, strike: f64, cp: CallPut) -> AmericanOption {
    AmericanOption {
        id: "test".into(),
        notional: 1_000_000.0,
        strike,
        exercise_start: valuation().add_days(start),
        exercise_end: valuation().add_days(end),
        call_put: cp,
    }
}

#[test]
fn collapsed_window_equals_european() {
    let f = field(&skewed(), 365, 50);
    for cp in [CallPut::Call, CallPut::Put] {
        let deal = american(365, 365, 7.05, cp);
        let am = price_american(&f, &deal, &discount()).unwrap();
        let eu = price_european_on_grid(
            &f,
            &[Vanilla {
                expiry: deal.exercise_end,
                strike: 7.05,
                call_put: cp,
            }],
            &discount(),
        )
        .unwrap()[0]
            * deal.notional;
        assert!((am - eu).abs() < 1e-9 * deal.notional, "{am} vs {eu}");
    }
}

#[test]
fn american_requires_transitions() {
    let grid = build_time_grid(valuation(), &[valuation().add_days(30)], 3).unwrap();
    let f = GridField::build(&grid, &flat(0.05), &forward(), 20, false).unwrap();
    assert!(price_american(&f, &american(0, 30, 7.1, CallPut::Call), &discount()).is_err());
}

#[test]
fn american_refinement_within_one_bp_flat_vol() {
    let deals = [
        american(30, 365, 7.0, CallPut::Call),
        american(0, 30, 7.106, CallPut::Put),
    ];
    for deal in &deals {
        let prices: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&i| price_american(&field(&flat(0.043), 365, i), deal, &discount()).unwrap())
            .collect();
        let spread = prices.iter().copied().fold(f64::MIN, f64::max) - prices.iter().copied().fold(f64::MAX, f64::min);
        assert!(spread / (deal.notional * 7.115) <= 1e-4, "{prices:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn american_dominates_european(start in 0i64..200, len in 1i64..160, strike in 6.8f64..7.3, put in any::<bool>()) {
        let cp = if put { CallPut::Put } else { CallPut::Call };
        let deal = american(start, start + len, strike, cp);
        let grid = build_time_grid(valuation(), &[deal.exercise_start, deal.exercise_end], 3).unwrap();
        let f = GridField::build(&grid, &skewed(), &forward(), 30, true).unwrap();
        let am = price_american(&f, &deal, &discount()).unwrap();
        let eu = deal.notional * price_european_on_grid(
            &f,
            &[Vanilla { expiry: deal.exercise_end, strike, call_put: cp }],
            &discount(),
        ).unwrap()[0];
        prop_assert!(am >= eu - 1e-9 * deal.notional);
        if start == 0 {
            prop_assert!(am >= deal.notional * cp.intrinsic(7.115, strike) - 1e-9);
        }
    }

    #[test]
    fn rows_sum_to_one(x in -0.05f64..0.05, vol in 1e-4f64..0.3, days in 1u32..4) {
        let f = field(&flat(0.05), 30, 50);
        let (row, _) = transition_row_onto(x, vol, days as f64 / 365.0, f.slice(6));
        prop_assert!((row.sum() - 1.0).abs() < 1e-12);
    }
}
