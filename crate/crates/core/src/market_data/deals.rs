use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::date::Date;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallPut {
    Call,
    Put,
}

impl CallPut {
    /// +1 for calls, -1 for puts.
    pub fn sign(self) -> f64 {
        match self {
            CallPut::Call => 1.0,
            CallPut::Put => -1.0,
        }
    }

    /// Undiscounted vanilla payoff per unit notional.
    #[inline]
    pub fn intrinsic(self, underlying: f64, strike: f64) -> f64 {
        (self.sign() * (underlying - strike)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Arithmetic,
    Geometric,
}

/// Whether the fixing average replaces the underlying (`Spot`) or the
/// strike (`Strike`) in the payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsianFamily {
    Spot,
    Strike,
}

/// Expiry, strike and side of a European payoff, per unit notional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vanilla {
    pub expiry: Date,
    pub strike: f64,
    pub call_put: CallPut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuropeanOption {
    pub id: String,
    pub notional: f64,
    pub strike: f64,
    pub expiry: Date,
    pub call_put: CallPut,
}

/// Exercisable once, on any date in `[exercise_start, exercise_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmericanOption {
    pub id: String,
    pub notional: f64,
    pub strike: f64,
    pub exercise_start: Date,
    pub exercise_end: Date,
    pub call_put: CallPut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsianOption {
    pub id: String,
    pub notional: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    pub fixing_dates: Vec<Date>,
    pub averaging: Averaging,
    pub family: AsianFamily,
    pub expiry: Date,
    pub call_put: CallPut,
    /// Observed fixings for dates before valuation.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub historical_fixings: BTreeMap<Date, f64>,
    /// Defaults to `expiry`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payment_date: Option<Date>,
}

impl AsianOption {
    pub fn payment_date(&self) -> Date {
        self.payment_date.unwrap_or(self.expiry)
    }
}

fn check_positive(deal: &str, field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            format!("deal {deal}"),
            format!("{field} = {value} must be positive"),
        ))
    }
}

impl EuropeanOption {
    pub fn vanilla(&self) -> Vanilla {
        Vanilla {
            expiry: self.expiry,
            strike: self.strike,
            call_put: self.call_put,
        }
    }

    pub fn validate(&self, valuation: Date) -> Result<()> {
        check_positive(&self.id, "notional", self.notional)?;
        check_positive(&self.id, "strike", self.strike)?;
        if self.expiry < valuation {
            return Err(Error::invalid(
                format!("deal {}", self.id),
                format!("expiry {} precedes valuation {valuation}", self.expiry),
            ));
        }
        Ok(())
    }
}

impl AmericanOption {
    pub fn validate(&self, valuation: Date) -> Result<()> {
        check_positive(&self.id, "notional", self.notional)?;
        check_positive(&self.id, "strike", self.strike)?;
        if self.exercise_start > self.exercise_end {
            return Err(Error::invalid(
                format!("deal {}", self.id),
                format!(
                    "exercise window start {} after end {}",
                    self.exercise_start, self.exercise_end
                ),
            ));
        }
        if self.exercise_end < valuation {
            return Err(Error::invalid(
                format!("deal {}", self.id),
                format!("exercise window ended {} before valuation", self.exercise_end),
            ));
        }
        Ok(())
    }
}

impl AsianOption {
    pub fn validate(&self, valuation: Date) -> Result<()> {
        let what = || format!("deal {}", self.id);
        check_positive(&self.id, "notional", self.notional)?;
        match (self.family, self.strike) {
            (AsianFamily::Spot, None) => return Err(Error::invalid(what(), "spot-family payoff requires a strike")),
            (_, Some(k)) => check_positive(&self.id, "strike", k)?,
            (AsianFamily::Strike, None) => {}
        }
        if self.fixing_dates.is_empty() {
            return Err(Error::invalid(what(), "fixing schedule is empty"));
        }
        for w in self.fixing_dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid(
                    what(),
                    format!("fixing dates not strictly increasing at {}", w[1]),
                ));
            }
        }
        if *self.fixing_dates.last().unwrap() > self.expiry {
            return Err(Error::invalid(what(), "fixing after expiry"));
        }
        if self.expiry < valuation {
            return Err(Error::invalid(
                what(),
                format!("expiry {} precedes valuation", self.expiry),
            ));
        }
        if self.payment_date() < self.expiry {
            return Err(Error::invalid(what(), "payment date precedes expiry"));
        }
        for date in self.fixing_dates.iter().filter(|d| **d < valuation) {
            match self.historical_fixings.get(date) {
                Some(v) if v.is_finite() && *v > 0.0 => {}
                Some(v) => {
                    return Err(Error::invalid(
                        what(),
                        format!("historical fixing {v} on {date} not positive"),
                    ))
                }
                None => {
                    return Err(Error::MissingFixing {
                        deal: self.id.clone(),
                        date: *date,
                    })
                }
            }
        }
        Ok(())
    }
}

/// A deal from the deals file, discriminated by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Deal {
    American(AmericanOption),
    Asian(AsianOption),
    European(EuropeanOption),
}

impl Deal {
    pub fn id(&self) -> &str {
        match self {
            Deal::American(d) => &d.id,
            Deal::Asian(d) => &d.id,
            Deal::European(d) => &d.id,
        }
    }

    pub fn notional(&self) -> f64 {
        match self {
            Deal::American(d) => d.notional,
            Deal::Asian(d) => d.notional,
            Deal::European(d) => d.notional,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Deal::American(_) => "american",
            Deal::Asian(_) => "asian",
            Deal::European(_) => "european",
        }
    }

    pub fn validate(&self, valuation: Date) -> Result<()> {
        match self {
            Deal::American(d) => d.validate(valuation),
            Deal::Asian(d) => d.validate(valuation),
            Deal::European(d) => d.validate(valuation),
        }
    }
}
