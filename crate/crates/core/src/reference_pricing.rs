//! Black-Scholes market prices for calibration targets, delta-to-strike
//! resolution and closed-form oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{year_fraction, CallPut, Date, InstrumentSelection, MarketSnapshot, QuoteKind, Vanilla};
use crate::normal::{normal_cdf, normal_inv};

/// Black (forward) price per unit notional in currency2.
///
/// A zero total standard deviation, zero strike or zero forward returns the
/// discounted intrinsic value on the forward.
pub fn black_scholes_price(forward: f64, strike: f64, vol: f64, expiry: f64, df: f64, cp: CallPut) -> Result<f64> {
    for (name, v) in [
        ("forward", forward),
        ("strike", strike),
        ("vol", vol),
        ("expiry", expiry),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::domain("black_scholes_price", format!("{name} = {v}")));
        }
    }
    if !(df > 0.0 && df.is_finite()) {
        return Err(Error::domain("black_scholes_price", format!("discount factor = {df}")));
    }
    Ok(black_unchecked(forward, strike, vol * expiry.sqrt(), df, cp))
}

pub(crate) fn black_unchecked(forward: f64, strike: f64, std_dev: f64, df: f64, cp: CallPut) -> f64 {
    if std_dev == 0.0 || strike == 0.0 || forward == 0.0 {
        return df * cp.intrinsic(forward, strike);
    }
    let w = cp.sign();
    let d1 = (forward / strike).ln() / std_dev + 0.5 * std_dev;
    let d2 = d1 - std_dev;
    df * w * (forward * normal_cdf(w * d1) - strike * normal_cdf(w * d2))
}

/// Forward delta `Φ(cp·d1)` (premium excluded), as a positive number.
pub fn forward_delta(forward: f64, strike: f64, vol: f64, expiry: f64, cp: CallPut) -> f64 {
    let sd = vol * expiry.sqrt();
    let d1 = (forward / strike).ln() / sd + 0.5 * sd;
    normal_cdf(cp.sign() * d1)
}

/// Delta conventions understood by [`strike_from_delta`]. Only forward delta
/// with premium excluded is implemented; ATM means at-the-money forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConvention {
    #[default]
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaLevel {
    Atmf,
    Delta25,
    Delta10,
}

impl DeltaLevel {
    pub fn value(self) -> Option<f64> {
        match self {
            DeltaLevel::Atmf => None,
            DeltaLevel::Delta25 => Some(0.25),
            DeltaLevel::Delta10 => Some(0.10),
        }
    }
}

impl QuoteKind {
    /// Delta level and option side priced for this quote. ATMF is priced as
    /// a call.
    pub fn instrument(self) -> (DeltaLevel, CallPut) {
        match self {
            QuoteKind::Atmf => (DeltaLevel::Atmf, CallPut::Call),
            QuoteKind::Call25 => (DeltaLevel::Delta25, CallPut::Call),
            QuoteKind::Put25 => (DeltaLevel::Delta25, CallPut::Put),
            QuoteKind::Call10 => (DeltaLevel::Delta10, CallPut::Call),
            QuoteKind::Put10 => (DeltaLevel::Delta10, CallPut::Put),
        }
    }
}

/// Strike whose forward delta equals `level`; ATMF gives `K = F`.
pub fn strike_from_delta(forward: f64, vol: f64, expiry: f64, level: DeltaLevel, cp: CallPut) -> Result<f64> {
    let Some(delta) = level.value() else {
        return Ok(forward);
    };
    if !(vol > 0.0 && expiry > 0.0) {
        return Err(Error::domain(
            "strike_from_delta",
            format!("vol = {vol}, expiry = {expiry}"),
        ));
    }
    let sd = vol * expiry.sqrt();
    Ok(forward * (-cp.sign() * sd * normal_inv(delta)? + 0.5 * sd * sd).exp())
}

/// A European calibration instrument resolved from one vol quote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSpec {
    pub tenor: String,
    pub kind: QuoteKind,
    pub expiry: Date,
    pub expiry_time: f64,
    pub strike: f64,
    pub call_put: CallPut,
    pub level: DeltaLevel,
    pub quote_vol: f64,
    pub forward: f64,
    pub df: f64,
}

impl InstrumentSpec {
    pub fn vanilla(&self) -> Vanilla {
        Vanilla {
            expiry: self.expiry,
            strike: self.strike,
            call_put: self.call_put,
        }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.tenor, self.kind)
    }

    pub fn black_scholes(&self) -> Result<f64> {
        black_scholes_price(
            self.forward,
            self.strike,
            self.quote_vol,
            self.expiry_time,
            self.df,
            self.call_put,
        )
    }
}

/// Selected instruments, in selection order, with their Black-Scholes prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPrices {
    pub instruments: Vec<InstrumentSpec>,
    pub prices: Vec<f64>,
}

impl MarketPrices {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Resolves the selected quotes to strikes and prices each with its own
/// quoted volatility.
pub fn market_price_vector(snapshot: &MarketSnapshot, selection: &InstrumentSelection) -> Result<MarketPrices> {
    let mut instruments = Vec::new();
    let mut prices = Vec::new();
    for quote in selection.apply(&snapshot.quotes) {
        let wrap = |e: Error| Error::Instrument {
            instrument: quote.key(),
            source: Box::new(e),
        };
        let expiry_time = year_fraction(snapshot.valuation, quote.expiry).map_err(wrap)?;
        let forward = snapshot.forward.forward_at(quote.expiry).map_err(wrap)?;
        let df = snapshot.discount.df_at(quote.expiry).map_err(wrap)?;
        let (level, call_put) = quote.kind.instrument();
        let strike = strike_from_delta(forward, quote.vol, expiry_time, level, call_put).map_err(wrap)?;
        let spec = InstrumentSpec {
            tenor: quote.tenor.clone(),
            kind: quote.kind,
            expiry: quote.expiry,
            expiry_time,
            strike,
            call_put,
            level,
            quote_vol: quote.vol,
            forward,
            df,
        };
        prices.push(spec.black_scholes().map_err(wrap)?);
        instruments.push(spec);
    }
    Ok(MarketPrices { instruments, prices })
}

/// Geometric-average Asian price under a flat lognormal volatility.
///
/// `forwards[i]` is the forward at fixing time `times[i]`. The log of the
/// geometric average is normal with variance `σ²/n² Σ_ij min(t_i, t_j)`.
pub fn geometric_asian_closed_form(
    forwards: &[f64],
    strike: f64,
    vol: f64,
    times: &[f64],
    df: f64,
    cp: CallPut,
) -> Result<f64> {
    let n = forwards.len();
    if n == 0 || times.len() != n {
        return Err(Error::domain(
            "geometric_asian_closed_form",
            "forwards and times must be non-empty and equal length",
        ));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || forwards.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::domain(
            "geometric_asian_closed_form",
            "fixing times and forwards must be positive",
        ));
    }
    let nf = n as f64;
    let mean_log_forward = forwards.iter().map(|f| f.ln()).sum::<f64>() / nf;
    let mean_time = times.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    for &a in times {
        for &b in times {
            cov += a.min(b);
        }
    }
    let variance = vol * vol * cov / (nf * nf);
    let effective_forward = (mean_log_forward - 0.5 * vol * vol * mean_time + 0.5 * variance).exp();
    Ok(black_unchecked(effective_forward, strike, variance.sqrt(), df, cp))
}
