use crate::error::{Error, Result};

use super::date::{Date, DAYS_PER_YEAR};

/// Pillars of a positive curve interpolated log-linearly in calendar days.
#[derive(Debug, Clone, PartialEq)]
struct LogLinear {
    dates: Vec<Date>,
    days: Vec<f64>,
    values: Vec<f64>,
    logs: Vec<f64>,
}

impl LogLinear {
    fn new(curve: &'static str, valuation: Date, pillars: Vec<(Date, f64)>) -> Result<Self> {
        if pillars.is_empty() {
            return Err(Error::invalid(curve, "curve has no pillars"));
        }
        if pillars[0].0 != valuation {
            return Err(Error::invalid(
                curve,
                format!("first pillar {} is not the valuation date {valuation}", pillars[0].0),
            ));
        }
        for w in pillars.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(
                    curve,
                    format!("pillar dates not strictly increasing at {}", w[1].0),
                ));
            }
        }
        if let Some((date, value)) = pillars.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(curve, format!("non-positive value {value} at {date}")));
        }
        Ok(LogLinear {
            days: pillars.iter().map(|(d, _)| valuation.days_until(*d) as f64).collect(),
            logs: pillars.iter().map(|(_, v)| v.ln()).collect(),
            values: pillars.iter().map(|(_, v)| *v).collect(),
            dates: pillars.into_iter().map(|(d, _)| d).collect(),
        })
    }

    fn first(&self) -> Date {
        self.dates[0]
    }

    fn last(&self) -> Date {
        *self.dates.last().unwrap()
    }

    fn at(&self, curve: &'static str, date: Date) -> Result<f64> {
        if date < self.first() || date > self.last() {
            return Err(Error::Extrapolation {
                curve,
                date,
                first: self.first(),
                last: self.last(),
            });
        }
        Ok(self.at_day(self.first().days_until(date) as f64))
    }

    /// Day offset from the first pillar; flat beyond either end.
    fn at_day(&self, day: f64) -> f64 {
        let k = self.days.partition_point(|&p| p <= day);
        if k == 0 {
            return self.values[0];
        }
        if k == self.days.len() {
            return *self.values.last().unwrap();
        }
        let lo = k - 1;
        if self.days[lo] == day {
            return self.values[lo];
        }
        let w = (day - self.days[lo]) / (self.days[k] - self.days[lo]);
        (self.logs[lo] + w * (self.logs[k] - self.logs[lo])).exp()
    }
}

/// FX forward curve, currency2 per currency1. The first pillar is spot.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCurve {
    inner: LogLinear,
}

impl ForwardCurve {
    pub fn new(valuation: Date, pillars: Vec<(Date, f64)>) -> Result<Self> {
        Ok(ForwardCurve {
            inner: LogLinear::new("forward", valuation, pillars)?,
        })
    }

    /// A curve with the same forward everywhere up to `horizon`.
    pub fn flat(valuation: Date, horizon: Date, forward: f64) -> Result<Self> {
        let mut pillars = vec![(valuation, forward)];
        if horizon > valuation {
            pillars.push((horizon, forward));
        }
        Self::new(valuation, pillars)
    }

    pub fn valuation(&self) -> Date {
        self.inner.first()
    }

    pub fn last_date(&self) -> Date {
        self.inner.last()
    }

    pub fn spot(&self) -> f64 {
        self.inner.values[0]
    }

    pub fn pillars(&self) -> impl Iterator<Item = (Date, f64)> + '_ {
        self.inner.dates.iter().copied().zip(self.inner.values.iter().copied())
    }

    pub fn forward_at(&self, date: Date) -> Result<f64> {
        self.inner.at("forward", date)
    }

    /// Forward at a year fraction from valuation; held flat outside the
    /// pillar range.
    pub fn forward_at_time(&self, t: f64) -> f64 {
        self.inner.at_day(t * DAYS_PER_YEAR)
    }
}

/// Discount factors of currency2 (the premium currency).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountCurve {
    inner: LogLinear,
}

impl DiscountCurve {
    pub fn new(valuation: Date, pillars: Vec<(Date, f64)>) -> Result<Self> {
        let inner = LogLinear::new("discount", valuation, pillars)?;
        if (inner.values[0] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "discount",
                format!("discount factor at valuation is {}, expected 1", inner.values[0]),
            ));
        }
        Ok(DiscountCurve { inner })
    }

    /// Continuously compounded flat rate up to `horizon`.
    pub fn flat_rate(valuation: Date, horizon: Date, rate: f64) -> Result<Self> {
        let mut pillars = vec![(valuation, 1.0)];
        if horizon > valuation {
            let t = valuation.days_until(horizon) as f64 / DAYS_PER_YEAR;
            pillars.push((horizon, (-rate * t).exp()));
        }
        Self::new(valuation, pillars)
    }

    pub fn valuation(&self) -> Date {
        self.inner.first()
    }

    pub fn last_date(&self) -> Date {
        self.inner.last()
    }

    pub fn pillars(&self) -> impl Iterator<Item = (Date, f64)> + '_ {
        self.inner.dates.iter().copied().zip(self.inner.values.iter().copied())
    }

    pub fn df_at(&self, date: Date) -> Result<f64> {
        self.inner.at("discount", date)
    }
}
