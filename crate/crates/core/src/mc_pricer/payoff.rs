use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{AsianFamily, AsianOption, Averaging, DiscountCurve, Vanilla};

use super::paths::PathSet;

/// Present value with its Monte-Carlo standard error and the run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McPrice {
    pub pv: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
    pub algorithm: String,
}

/// Arithmetic mean or geometric mean (in log space) of the fixings.
pub fn fixing_average(fixings: &[f64], kind: Averaging) -> Result<f64> {
    if fixings.is_empty() {
        return Err(Error::domain("fixing_average", "no fixings"));
    }
    let n = fixings.len() as f64;
    Ok(match kind {
        Averaging::Arithmetic => fixings.iter().sum::<f64>() / n,
        Averaging::Geometric => (fixings.iter().map(|s| s.ln()).sum::<f64>() / n).exp(),
    })
}

/// Payoff in currency2 given the fixing average and the FX rate at expiry.
pub fn asian_payoff(deal: &AsianOption, average: f64, at_expiry: f64) -> f64 {
    let per_unit = match deal.family {
        AsianFamily::Spot => deal.call_put.intrinsic(average, deal.strike.unwrap_or(f64::NAN)),
        AsianFamily::Strike => deal.call_put.intrinsic(at_expiry, average),
    };
    deal.notional * per_unit
}

enum Fixing {
    Observed(f64),
    Simulated(usize),
}

fn summarize(discounted: &[f64], paths: &PathSet) -> McPrice {
    let n = discounted.len() as f64;
    let mean = discounted.iter().sum::<f64>() / n;
    let var = if discounted.len() > 1 {
        discounted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    McPrice {
        pv: mean,
        std_error: (var / n).sqrt(),
        paths: paths.path_count(),
        seed: paths.rng().seed,
        algorithm: paths.rng().algorithm.clone(),
    }
}

/// Asian PV: discounted mean payoff over paths, observed fixings mixed in
/// for dates before valuation.
pub fn price_asian(paths: &PathSet, deal: &AsianOption, discount: &DiscountCurve) -> Result<McPrice> {
    let valuation = paths.time_grid().valuation();
    let fixings = deal
        .fixing_dates
        .iter()
        .map(|&date| {
            if date < valuation {
                deal.historical_fixings
                    .get(&date)
                    .map(|v| Fixing::Observed(*v))
                    .ok_or_else(|| Error::MissingFixing {
                        deal: deal.id.clone(),
                        date,
                    })
            } else {
                paths
                    .step_of(date)
                    .map(Fixing::Simulated)
                    .ok_or_else(|| Error::MissingFixing {
                        deal: deal.id.clone(),
                        date,
                    })
            }
        })
        .collect::<Result<Vec<Fixing>>>()?;
    let expiry_step = paths.step_of(deal.expiry);
    if deal.family == AsianFamily::Strike && expiry_step.is_none() {
        return Err(Error::OffGrid {
            grid: "path",
            date: deal.expiry,
        });
    }
    let df = discount.df_at(deal.payment_date())?;

    let discounted: Vec<f64> = (0..paths.path_count())
        .into_par_iter()
        .map(|i| {
            let values: Vec<f64> = fixings
                .iter()
                .map(|f| match f {
                    Fixing::Observed(v) => *v,
                    Fixing::Simulated(n) => paths.state(*n, i),
                })
                .collect();
            let average = fixing_average(&values, deal.averaging).expect("schedule is non-empty");
            let terminal = expiry_step.map_or(f64::NAN, |n| paths.state(n, i));
            df * asian_payoff(deal, average, terminal)
        })
        .collect();
    Ok(summarize(&discounted, paths))
}

/// European prices per unit notional from terminal states.
pub fn price_european_mc(paths: &PathSet, options: &[Vanilla], discount: &DiscountCurve) -> Result<Vec<McPrice>> {
    options
        .iter()
        .map(|o| {
            let n = paths.step_of(o.expiry).ok_or(Error::OffGrid {
                grid: "path",
                date: o.expiry,
            })?;
            let df = discount.df_at(o.expiry)?;
            let discounted: Vec<f64> = paths
                .step(n)
                .iter()
                .map(|s| df * o.call_put.intrinsic(*s, o.strike))
                .collect();
            Ok(summarize(&discounted, paths))
        })
        .collect()
}
