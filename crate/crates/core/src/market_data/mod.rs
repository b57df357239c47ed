//! Market inputs and deal definitions.

mod curves;
mod date;
mod deals;
pub mod io;
mod quotes;
mod validate;

pub use curves::{DiscountCurve, ForwardCurve};
pub use date::{year_fraction, Date, DAYS_PER_YEAR};
pub use deals::{AmericanOption, AsianFamily, AsianOption, Averaging, CallPut, Deal, EuropeanOption, Vanilla};
pub use quotes::{InstrumentSelection, MarketSnapshot, QuoteKind, VolQuote};
pub use validate::{validate_market, AtmVariance, Butterflies, Condition, ValidationReport, Violation};
