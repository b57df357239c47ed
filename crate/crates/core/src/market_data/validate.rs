use serde::{Deserialize, Serialize};

use super::quotes::{MarketSnapshot, QuoteKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// ATM total variance nondecreasing in expiry.
    C1,
    /// `0 <= BF25 <= BF10` per tenor.
    C2,
}

/// One link of the ATM variance chain: `vol² × days` for a tenor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmVariance {
    pub tenor: String,
    pub days: i64,
    pub atm_vol: f64,
    pub variance_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Butterflies {
    pub tenor: String,
    pub bf25: f64,
    pub bf10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub tenor: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub atm_chain: Vec<AtmVariance>,
    pub butterflies: Vec<Butterflies>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn violated_tenors(&self, condition: Condition) -> Vec<&str> {
        self.violations
            .iter()
            .filter(|v| v.condition == condition)
            .map(|v| v.tenor.as_str())
            .collect()
    }
}

/// Checks the two conditions a vol matrix needs for a clean calibration.
///
/// Variances are weighted by calendar days to expiry. Butterflies are only
/// checked for tenors quoting all four wings.
pub fn validate_market(snapshot: &MarketSnapshot) -> ValidationReport {
    let mut violations = Vec::new();

    let atm_chain: Vec<AtmVariance> = snapshot
        .atm_quotes()
        .into_iter()
        .map(|q| {
            let days = snapshot.valuation.days_until(q.expiry);
            AtmVariance {
                tenor: q.tenor.clone(),
                days,
                atm_vol: q.vol,
                variance_days: q.vol * q.vol * days as f64,
            }
        })
        .collect();
    for w in atm_chain.windows(2) {
        if w[1].variance_days < w[0].variance_days {
            violations.push(Violation {
                condition: Condition::C1,
                tenor: w[1].tenor.clone(),
                detail: format!(
                    "ATM variance {:.6e} x day at {} falls below {:.6e} at {}",
                    w[1].variance_days, w[1].tenor, w[0].variance_days, w[0].tenor
                ),
            });
        }
    }

    let mut butterflies = Vec::new();
    for (tenor, _) in snapshot.tenors() {
        let vol = |kind| snapshot.quote(&tenor, kind).map(|q| q.vol);
        let (Some(atm), Some(c25), Some(p25), Some(c10), Some(p10)) = (
            vol(QuoteKind::Atmf),
            vol(QuoteKind::Call25),
            vol(QuoteKind::Put25),
            vol(QuoteKind::Call10),
            vol(QuoteKind::Put10),
        ) else {
            continue;
        };
        let bf25 = 0.5 * (c25 + p25) - atm;
        let bf10 = 0.5 * (c10 + p10) - atm;
        if bf25 < 0.0 {
            violations.push(Violation {
                condition: Condition::C2,
                tenor: tenor.clone(),
                detail: format!("BF25 = {bf25:.6} is negative"),
            });
        } else if bf25 > bf10 {
            violations.push(Violation {
                condition: Condition::C2,
                tenor: tenor.clone(),
                detail: format!("BF25 = {bf25:.6} exceeds BF10 = {bf10:.6}"),
            });
        }
        butterflies.push(Butterflies { tenor, bf25, bf10 });
    }

    ValidationReport {
        passed: violations.is_empty(),
        atm_chain,
        butterflies,
        violations,
    }
}
