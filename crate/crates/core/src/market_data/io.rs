//! File formats for curves, vol quotes and deals.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

use super::curves::{DiscountCurve, ForwardCurve};
use super::date::Date;
use super::deals::Deal;
use super::quotes::{MarketSnapshot, QuoteKind, VolQuote};

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Reads `header` columns from a CSV file, returning (line number, record).
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let found = reader.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    let found: Vec<&str> = found.iter().collect();
    if found != header {
        return Err(parse_err(
            path,
            format!(
                "line 1: expected header '{}', found '{}'",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                format!("line {line}: expected {} fields", header.len()),
            ));
        }
        rows.push((line, record));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| parse_err(path, format!("line {line}: cannot parse {name} '{text}'")))
}

fn read_pillars(path: &Path, value_column: &str) -> Result<Vec<(Date, f64)>> {
    read_rows(path, &["date", value_column])?
        .into_iter()
        .map(|(line, r)| {
            Ok((
                field(path, line, "date", &r[0])?,
                field(path, line, value_column, &r[1])?,
            ))
        })
        .collect()
}

/// `date,forward` CSV; the first row is the valuation date and spot.
pub fn read_forward_curve(path: &Path) -> Result<ForwardCurve> {
    let pillars = read_pillars(path, "forward")?;
    let valuation = pillars.first().ok_or_else(|| parse_err(path, "no rows"))?.0;
    ForwardCurve::new(valuation, pillars).map_err(|e| parse_err(path, e.to_string()))
}

/// `date,df` CSV starting at the valuation date.
pub fn read_discount_curve(path: &Path) -> Result<DiscountCurve> {
    let pillars = read_pillars(path, "df")?;
    let valuation = pillars.first().ok_or_else(|| parse_err(path, "no rows"))?.0;
    DiscountCurve::new(valuation, pillars).map_err(|e| parse_err(path, e.to_string()))
}

/// `tenor,expiry,kind,vol_pct` CSV. Percent vols become decimals here.
pub fn read_vol_quotes(path: &Path) -> Result<Vec<VolQuote>> {
    read_rows(path, &["tenor", "expiry", "kind", "vol_pct"])?
        .into_iter()
        .map(|(line, r)| {
            let expiry: Date = field(path, line, "expiry", &r[1])?;
            let kind: QuoteKind = field(path, line, "kind", &r[2])?;
            let pct: f64 = field(path, line, "vol_pct", &r[3])?;
            VolQuote::new(&r[0], expiry, kind, pct / 100.0).map_err(|e| parse_err(path, format!("line {line}: {e}")))
        })
        .collect()
}

/// JSON array of deals (a single object is accepted too), validated against
/// the valuation date.
pub fn read_deals(path: &Path, valuation: Date) -> Result<Vec<Deal>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<Deal>),
        One(Deal),
    }
    let text = fs::read_to_string(path).map_err(|e| parse_err(path, e.to_string()))?;
    let deals = match serde_json::from_str::<OneOrMany>(&text) {
        Ok(OneOrMany::Many(d)) => d,
        Ok(OneOrMany::One(d)) => vec![d],
        Err(_) => {
            // re-parse as an array for a located error message
            serde_json::from_str::<Vec<Deal>>(&text).map_err(|e| parse_err(path, e.to_string()))?
        }
    };
    for deal in &deals {
        deal.validate(valuation)?;
    }
    Ok(deals)
}

pub fn read_market(forward: &Path, discount: &Path, vols: &Path) -> Result<MarketSnapshot> {
    MarketSnapshot::new(
        read_forward_curve(forward)?,
        read_discount_curve(discount)?,
        read_vol_quotes(vols)?,
    )
}
