use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::curves::{DiscountCurve, ForwardCurve};
use super::date::Date;

/// The five instruments quoted per tenor in the delta-quoted vol matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuoteKind {
    #[serde(rename = "ATMF")]
    Atmf,
    #[serde(rename = "25C")]
    Call25,
    #[serde(rename = "25P")]
    Put25,
    #[serde(rename = "10C")]
    Call10,
    #[serde(rename = "10P")]
    Put10,
}

impl QuoteKind {
    pub const ALL: [QuoteKind; 5] = [
        QuoteKind::Atmf,
        QuoteKind::Call25,
        QuoteKind::Put25,
        QuoteKind::Call10,
        QuoteKind::Put10,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QuoteKind::Atmf => "ATMF",
            QuoteKind::Call25 => "25C",
            QuoteKind::Put25 => "25P",
            QuoteKind::Call10 => "10C",
            QuoteKind::Put10 => "10P",
        }
    }
}

impl fmt::Display for QuoteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QuoteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuoteKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("quote kind", format!("unknown kind '{s}'")))
    }
}

/// One market volatility quote. `vol` is a decimal per annum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolQuote {
    pub tenor: String,
    pub expiry: Date,
    pub kind: QuoteKind,
    pub vol: f64,
}

impl VolQuote {
    pub fn new(tenor: impl Into<String>, expiry: Date, kind: QuoteKind, vol: f64) -> Result<Self> {
        let tenor = tenor.into();
        if !(vol.is_finite() && vol > 0.0) {
            return Err(Error::invalid(
                format!("quote {tenor}:{kind}"),
                format!("volatility {vol} must be positive"),
            ));
        }
        Ok(VolQuote {
            tenor,
            expiry,
            kind,
            vol,
        })
    }

    /// `TENOR:KIND`, the key used by instrument selections.
    pub fn key(&self) -> String {
        format!("{}:{}", self.tenor, self.kind)
    }
}

/// Curves and quotes observed on one valuation date.
#[derive(Debug, Clone)]
pub struct MarketSnapshot {
    pub valuation: Date,
    pub forward: Arc<ForwardCurve>,
    pub discount: Arc<DiscountCurve>,
    pub quotes: Vec<VolQuote>,
}

impl MarketSnapshot {
    pub fn new(forward: ForwardCurve, discount: DiscountCurve, quotes: Vec<VolQuote>) -> Result<Self> {
        let valuation = forward.valuation();
        if discount.valuation() != valuation {
            return Err(Error::invalid(
                "market snapshot",
                format!(
                    "forward curve starts {valuation}, discount curve starts {}",
                    discount.valuation()
                ),
            ));
        }
        let horizon = forward.last_date().min(discount.last_date());
        for q in &quotes {
            if q.expiry < valuation {
                return Err(Error::invalid(
                    format!("quote {}", q.key()),
                    format!("expiry {} precedes valuation {valuation}", q.expiry),
                ));
            }
            if q.expiry > horizon {
                return Err(Error::invalid(
                    format!("quote {}", q.key()),
                    format!("expiry {} beyond curve coverage ending {horizon}", q.expiry),
                ));
            }
        }
        Ok(MarketSnapshot {
            valuation,
            forward: Arc::new(forward),
            discount: Arc::new(discount),
            quotes,
        })
    }

    /// Distinct tenors in expiry order, each with its expiry date.
    pub fn tenors(&self) -> Vec<(String, Date)> {
        let mut out: Vec<(String, Date)> = Vec::new();
        for q in &self.quotes {
            if !out.iter().any(|(t, _)| *t == q.tenor) {
                out.push((q.tenor.clone(), q.expiry));
            }
        }
        out.sort_by_key(|(_, d)| *d);
        out
    }

    pub fn quote(&self, tenor: &str, kind: QuoteKind) -> Option<&VolQuote> {
        self.quotes.iter().find(|q| q.tenor == tenor && q.kind == kind)
    }

    /// ATMF quotes sorted by expiry.
    pub fn atm_quotes(&self) -> Vec<&VolQuote> {
        let mut atm: Vec<&VolQuote> = self.quotes.iter().filter(|q| q.kind == QuoteKind::Atmf).collect();
        atm.sort_by_key(|q| q.expiry);
        atm
    }
}

/// Which quotes become calibration instruments, by `TENOR:KIND` exclusion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentSelection {
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl InstrumentSelection {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn excluding<I, S>(keys: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        InstrumentSelection {
            exclude: keys.into_iter().map(Into::into).collect(),
        }
    }

    pub fn includes(&self, quote: &VolQuote) -> bool {
        let key = quote.key();
        !self.exclude.iter().any(|e| e.eq_ignore_ascii_case(&key))
    }

    /// Selected quotes in input order.
    pub fn apply<'a>(&self, quotes: &'a [VolQuote]) -> Vec<&'a VolQuote> {
        quotes.iter().filter(|q| self.includes(q)).collect()
    }
}
