use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Days per year in the ACT/365 fixed convention used for every year fraction.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// A calendar date with whole-day arithmetic.
///
/// Text form is `YYYYMMDD`. In JSON a date may be written either as that
/// string or as the integer `20221012`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date(NaiveDate);

impl Date {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(Date)
            .ok_or_else(|| Error::DateParse(format!("{year:04}{month:02}{day:02}")))
    }

    /// Builds a date from its `YYYYMMDD` integer form.
    pub fn from_yyyymmdd(value: u32) -> Result<Self> {
        Self::from_ymd((value / 10_000) as i32, value / 100 % 100, value % 100)
            .map_err(|_| Error::DateParse(value.to_string()))
    }

    pub fn yyyymmdd(self) -> u32 {
        self.0.year() as u32 * 10_000 + self.0.month() * 100 + self.0.day()
    }

    /// Signed number of days from `self` to `other`.
    pub fn days_until(self, other: Date) -> i64 {
        (other.0 - self.0).num_days()
    }

    pub fn add_days(self, days: i64) -> Date {
        let shifted = if days >= 0 {
            self.0.checked_add_days(Days::new(days as u64))
        } else {
            self.0.checked_sub_days(Days::new(days.unsigned_abs()))
        };
        Date(shifted.expect("date arithmetic overflow"))
    }

    pub fn weekday(self) -> chrono::Weekday {
        self.0.weekday()
    }
}

/// ACT/365 fixed year fraction between two ordered dates.
pub fn year_fraction(start: Date, end: Date) -> Result<f64> {
    if start > end {
        return Err(Error::DateOrder { start, end });
    }
    Ok(start.days_until(end) as f64 / DAYS_PER_YEAR)
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}", self.yyyymmdd())
    }
}

impl fmt::Debug for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Date {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::DateParse(s.to_string()));
        }
        let value: u32 = s.parse().map_err(|_| Error::DateParse(s.to_string()))?;
        Date::from_yyyymmdd(value)
    }
}

impl Serialize for Date {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u32(self.yyyymmdd())
    }
}

impl<'de> Deserialize<'de> for Date {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u32),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(v) => Date::from_yyyymmdd(v),
            Repr::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: u32) -> Date {
        Date::from_yyyymmdd(v).unwrap()
    }

    #[test]
    fn year_fraction_examples() {
        assert_eq!(year_fraction(d(20221012), d(20221012)).unwrap(), 0.0);
        assert_eq!(year_fraction(d(20221012), d(20231012)).unwrap(), 1.0);
        assert_eq!(year_fraction(d(20220926), d(20220930)).unwrap(), 4.0 / 365.0);
    }

    #[test]
    fn year_fraction_rejects_reversed_dates() {
        assert!(matches!(
            year_fraction(d(20221013), d(20221012)),
            Err(Error::DateOrder { .. })
        ));
    }

    #[test]
    fn parse_and_display() {
        let date: Date = "20240229".parse().unwrap();
        assert_eq!(date.to_string(), "20240229");
        assert!("20230229".parse::<Date>().is_err());
        assert!("2023-01-01".parse::<Date>().is_err());
        let from_json: Vec<Date> = serde_json::from_str(r#"[20221012, "20221013"]"#).unwrap();
        assert_eq!(from_json, vec![d(20221012), d(20221013)]);
    }

    proptest! {
        #[test]
        fn year_fraction_is_additive(a in 0i64..4000, b in 0i64..4000, c in 0i64..4000) {
            let mut v = [a, b, c];
            v.sort();
            let base = d(20200101);
            let (x, y, z) = (base.add_days(v[0]), base.add_days(v[1]), base.add_days(v[2]));
            let days = |p: Date, q: Date| p.days_until(q);
            // additive in whole days, hence in the rational year fraction
            prop_assert_eq!(days(x, y) + days(y, z), days(x, z));
            let lhs = year_fraction(x, y).unwrap() + year_fraction(y, z).unwrap();
            prop_assert!((lhs - year_fraction(x, z).unwrap()).abs() < 1e-14);
        }
    }
}
