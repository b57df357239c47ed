use crate::error::{Error, Result};
use crate::market_data::{AmericanOption, DiscountCurve, Vanilla};

use super::field::GridField;

fn require_propagated(field: &GridField) -> Result<()> {
    if field.is_propagated() {
        Ok(())
    } else {
        Err(Error::invalid("grid field", "forward propagation has not been run"))
    }
}

/// European prices per unit notional from the arrival probabilities at each
/// expiry slice: `DF(T) Σ_k q_k payoff(S_k)`.
pub fn price_european_on_grid(field: &GridField, options: &[Vanilla], discount: &DiscountCurve) -> Result<Vec<f64>> {
    require_propagated(field)?;
    options
        .iter()
        .map(|o| {
            let n = field.time_grid().index_of(o.expiry).ok_or(Error::OffGrid {
                grid: "lattice",
                date: o.expiry,
            })?;
            let slice = field.slice(n);
            let expected: f64 = slice
                .arrival
                .iter()
                .zip(&slice.states)
                .map(|(q, s)| q * o.call_put.intrinsic(*s, o.strike))
                .sum();
            Ok(discount.df_at(o.expiry)? * expected)
        })
        .collect()
}

/// American PV in currency2 by backward induction, exercising whenever the
/// immediate payoff beats the continuation value inside the exercise window.
pub fn price_american(field: &GridField, deal: &AmericanOption, discount: &DiscountCurve) -> Result<f64> {
    require_propagated(field)?;
    if !field.has_transitions() {
        return Err(Error::invalid("grid field", "built without stored transitions"));
    }
    let grid = field.time_grid();
    let last = grid.index_of(deal.exercise_end).ok_or(Error::OffGrid {
        grid: "lattice",
        date: deal.exercise_end,
    })?;
    let exercisable = |n: usize| {
        let d = grid.dates()[n];
        d >= deal.exercise_start && d <= deal.exercise_end
    };
    let payoff = |s: f64| deal.call_put.intrinsic(s, deal.strike);

    let mut values: Vec<f64> = field.slice(last).states.iter().map(|s| payoff(*s)).collect();
    let mut df_next = discount.df_at(grid.dates()[last])?;
    for n in (0..last).rev() {
        let df_here = discount.df_at(grid.dates()[n])?;
        let step_discount = df_next / df_here;
        let matrix = field.transitions(n);
        let slice = field.slice(n);
        let mut rolled: Vec<f64> = (0..slice.node_count())
            .map(|i| step_discount * matrix.row(i).map(|(j, p)| p * values[j]).sum::<f64>())
            .collect();
        if exercisable(n) {
            for (v, s) in rolled.iter_mut().zip(&slice.states) {
                *v = v.max(payoff(*s));
            }
        }
        values = rolled;
        df_next = df_here;
    }
    Ok(deal.notional * values[0])
}
