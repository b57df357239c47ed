use crate::error::{Error, Result};
use crate::market_data::{year_fraction, Date};

/// Default largest spacing between consecutive grid dates.
pub const DEFAULT_MAX_GAP_DAYS: u32 = 3;

/// Ordered simulation dates starting at valuation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    dates: Vec<Date>,
    times: Vec<f64>,
    special: Vec<bool>,
}

impl TimeGrid {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    /// Year fractions from valuation.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn valuation(&self) -> Date {
        self.dates[0]
    }

    pub fn horizon(&self) -> Date {
        *self.dates.last().unwrap()
    }

    pub fn is_special(&self, n: usize) -> bool {
        self.special[n]
    }

    /// Year fraction between slice `n` and `n + 1`.
    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    pub fn index_of(&self, date: Date) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn max_gap_days(&self) -> i64 {
        self.dates.windows(2).map(|w| w[0].days_until(w[1])).max().unwrap_or(0)
    }
}

/// Valuation date, every special date, and evenly spread fill-in dates so
/// that no two consecutive dates are more than `max_gap_days` apart.
pub fn build_time_grid(valuation: Date, special_dates: &[Date], max_gap_days: u32) -> Result<TimeGrid> {
    if max_gap_days == 0 {
        return Err(Error::invalid("time grid", "max gap must be at least one day"));
    }
    if let Some(d) = special_dates.iter().find(|d| **d < valuation) {
        return Err(Error::invalid(
            "time grid",
            format!("special date {d} precedes valuation {valuation}"),
        ));
    }
    let mut knots: Vec<Date> = special_dates.to_vec();
    knots.push(valuation);
    knots.sort();
    knots.dedup();
    if knots.len() < 2 {
        return Err(Error::invalid(
            "time grid",
            "no special date after valuation; empty horizon",
        ));
    }

    let mut dates = vec![valuation];
    let mut special = vec![special_dates.contains(&valuation)];
    let gap_limit = i64::from(max_gap_days);
    for w in knots.windows(2) {
        let gap = w[0].days_until(w[1]);
        let pieces = (gap + gap_limit - 1) / gap_limit;
        for i in 1..pieces {
            // rounded even split; consecutive offsets differ by at most the limit
            let offset = (i * gap + pieces / 2) / pieces;
            dates.push(w[0].add_days(offset));
            special.push(false);
        }
        dates.push(w[1]);
        special.push(true);
    }
    let times = dates
        .iter()
        .map(|d| year_fraction(valuation, *d))
        .collect::<Result<Vec<f64>>>()?;
    Ok(TimeGrid { dates, times, special })
}
