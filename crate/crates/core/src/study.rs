//! Deal pricing across backends and resolution convergence studies.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_pricer::{build_time_grid, price_american, price_european_on_grid, GridField, DEFAULT_MAX_GAP_DAYS};
use crate::market_data::{Deal, DiscountCurve};
use crate::mc_pricer::{build_mc_time_steps, generate_paths, price_asian, price_european_mc, RngSpec};
use crate::vol_surface::LocalVolSurface;

/// Half-grid sizes used for lattice convergence tables.
pub const GRID_RESOLUTIONS: [usize; 3] = [50, 100, 200];
/// Path counts used for Monte-Carlo convergence tables.
pub const PATH_COUNTS: [usize; 4] = [5000, 10000, 15000, 20000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Grid,
    MonteCarlo,
}

impl Backend {
    pub fn label(self) -> &'static str {
        match self {
            Backend::Grid => "grid",
            Backend::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingSettings {
    pub half_width: usize,
    pub paths: usize,
    pub seed: u64,
    pub max_gap_days: u32,
    /// Americans always use the grid and Asians Monte-Carlo.
    pub european_backend: Backend,
}

impl Default for PricingSettings {
    fn default() -> Self {
        PricingSettings {
            half_width: 100,
            paths: 20000,
            seed: 1,
            max_gap_days: DEFAULT_MAX_GAP_DAYS,
            european_backend: Backend::Grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DealPrice {
    pub id: String,
    pub kind: String,
    pub pv: f64,
    pub backend: Backend,
    /// Half-grid size or path count.
    pub resolution: usize,
    pub std_error: Option<f64>,
    pub seed: Option<u64>,
}

fn backend_for(deal: &Deal, settings: &PricingSettings) -> Backend {
    match deal {
        Deal::American(_) => Backend::Grid,
        Deal::Asian(_) => Backend::MonteCarlo,
        Deal::European(_) => settings.european_backend,
    }
}

/// Prices every deal; output order follows `deals`.
pub fn price_deals(
    surface: &LocalVolSurface,
    discount: &DiscountCurve,
    deals: &[Deal],
    settings: &PricingSettings,
) -> Result<Vec<DealPrice>> {
    let forward = surface.forward();
    let valuation = forward.valuation();
    let wrap = |deal: &Deal| {
        let id = deal.id().to_string();
        move |e: Error| Error::Instrument {
            instrument: id,
            source: Box::new(e),
        }
    };
    let grid_deals: Vec<&Deal> = deals
        .iter()
        .filter(|d| backend_for(d, settings) == Backend::Grid)
        .collect();
    let mc_deals: Vec<&Deal> = deals
        .iter()
        .filter(|d| backend_for(d, settings) == Backend::MonteCarlo)
        .collect();

    let field = if grid_deals.is_empty() {
        None
    } else {
        let specials: Vec<_> = grid_deals
            .iter()
            .flat_map(|d| match d {
                Deal::American(a) => vec![a.exercise_start.max(valuation), a.exercise_end],
                Deal::European(e) => vec![e.expiry],
                Deal::Asian(_) => vec![],
            })
            .collect();
        let grid = build_time_grid(valuation, &specials, settings.max_gap_days)?;
        Some(GridField::build(&grid, surface, forward, settings.half_width, true)?)
    };

    let paths = if mc_deals.is_empty() {
        None
    } else {
        let mut fixings = Vec::new();
        let mut expiries = Vec::new();
        for d in &mc_deals {
            match d {
                Deal::Asian(a) => {
                    fixings.extend(a.fixing_dates.iter().copied());
                    expiries.push(a.expiry);
                }
                Deal::European(e) => expiries.push(e.expiry),
                Deal::American(_) => {}
            }
        }
        let grid = build_mc_time_steps(valuation, &fixings, &expiries, settings.max_gap_days)?;
        Some(generate_paths(
            surface,
            forward,
            &grid,
            settings.paths,
            &RngSpec::new(settings.seed),
        )?)
    };

    deals
        .iter()
        .map(|deal| {
            let backend = backend_for(deal, settings);
            let (pv, std_error) = match (deal, backend, &field, &paths) {
                (Deal::American(a), Backend::Grid, Some(f), _) => {
                    (price_american(f, a, discount).map_err(wrap(deal))?, None)
                }
                (Deal::European(e), Backend::Grid, Some(f), _) => {
                    let unit = price_european_on_grid(f, &[e.vanilla()], discount).map_err(wrap(deal))?[0];
                    (e.notional * unit, None)
                }
                (Deal::European(e), Backend::MonteCarlo, _, Some(p)) => {
                    let unit = price_european_mc(p, &[e.vanilla()], discount)
                        .map_err(wrap(deal))?
                        .remove(0);
                    (e.notional * unit.pv, Some(e.notional * unit.std_error))
                }
                (Deal::Asian(a), Backend::MonteCarlo, _, Some(p)) => {
                    let price = price_asian(p, a, discount).map_err(wrap(deal))?;
                    (price.pv, Some(price.std_error))
                }
                _ => {
                    return Err(Error::invalid(
                        format!("deal {}", deal.id()),
                        format!(
                            "{} deals cannot be priced with the {} backend",
                            deal.kind(),
                            backend.label()
                        ),
                    ))
                }
            };
            Ok(DealPrice {
                id: deal.id().to_string(),
                kind: deal.kind().to_string(),
                pv,
                backend,
                resolution: match backend {
                    Backend::Grid => settings.half_width,
                    Backend::MonteCarlo => settings.paths,
                },
                std_error,
                seed: (backend == Backend::MonteCarlo).then_some(settings.seed),
            })
        })
        .collect()
}

/// `id,kind,backend,resolution,pv,std_error,seed` with 10 significant digits.
pub fn prices_csv(prices: &[DealPrice]) -> String {
    let mut out = String::from("id,kind,backend,resolution,pv,std_error,seed\n");
    for p in prices {
        let se = p.std_error.map(|v| format!("{v:.9e}")).unwrap_or_default();
        let seed = p.seed.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{:.9e},{se},{seed}",
            p.id,
            p.kind,
            p.backend.label(),
            p.resolution,
            p.pv
        );
    }
    out
}

/// One deal repriced at several resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub id: String,
    pub kind: String,
    pub backend: Backend,
    pub notional: f64,
    pub resolutions: Vec<usize>,
    pub pvs: Vec<f64>,
    pub std_errors: Vec<Option<f64>>,
    /// Largest pairwise PV difference over `1e-4 · N · F(t⁰)`.
    pub max_deviation_bp: f64,
}

/// Max pairwise deviation of `pvs` in basis points of `notional · spot`.
pub fn max_deviation_bp(pvs: &[f64], notional: f64, spot: f64) -> f64 {
    let (lo, hi) = pvs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    if pvs.is_empty() {
        0.0
    } else {
        (hi - lo) / (notional * spot) * 1e4
    }
}

/// Reprices grid deals at each half-grid size and Monte-Carlo deals at each
/// path count, all other settings fixed.
pub fn convergence_study(
    surface: &LocalVolSurface,
    discount: &DiscountCurve,
    deals: &[Deal],
    settings: &PricingSettings,
    grid_resolutions: &[usize],
    path_counts: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let spot = surface.forward().spot();
    let mut rows: Vec<ConvergenceRow> = deals
        .iter()
        .map(|d| ConvergenceRow {
            id: d.id().to_string(),
            kind: d.kind().to_string(),
            backend: backend_for(d, settings),
            notional: d.notional(),
            resolutions: Vec::new(),
            pvs: Vec::new(),
            std_errors: Vec::new(),
            max_deviation_bp: 0.0,
        })
        .collect();

    for (backend, resolutions) in [(Backend::Grid, grid_resolutions), (Backend::MonteCarlo, path_counts)] {
        let subset: Vec<Deal> = deals
            .iter()
            .filter(|d| backend_for(d, settings) == backend)
            .cloned()
            .collect();
        if subset.is_empty() {
            continue;
        }
        for &resolution in resolutions {
            let mut local = settings.clone();
            match backend {
                Backend::Grid => local.half_width = resolution,
                Backend::MonteCarlo => local.paths = resolution,
            }
            for price in price_deals(surface, discount, &subset, &local)? {
                let row = rows
                    .iter_mut()
                    .find(|r| r.id == price.id)
                    .expect("deal ids come from the input");
                row.resolutions.push(resolution);
                row.pvs.push(price.pv);
                row.std_errors.push(price.std_error);
            }
        }
    }
    for row in &mut rows {
        row.max_deviation_bp = max_deviation_bp(&row.pvs, row.notional, spot);
    }
    Ok(rows)
}

/// Long format: one line per deal and resolution.
pub fn convergence_prices_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("id,kind,backend,resolution,pv,std_error\n");
    for r in rows {
        for ((res, pv), se) in r.resolutions.iter().zip(&r.pvs).zip(&r.std_errors) {
            let se = se.map(|v| format!("{v:.9e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{res},{pv:.9e},{se}", r.id, r.kind, r.backend.label());
        }
    }
    out
}

/// One line per deal with the max pairwise deviation.
pub fn convergence_summary_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("id,kind,backend,resolutions,max_deviation_bp_of_notional_times_spot\n");
    for r in rows {
        let res: Vec<String> = r.resolutions.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            r.id,
            r.kind,
            r.backend.label(),
            res.join(";"),
            r.max_deviation_bp
        );
    }
    out
}

/// Unique ids are required so rows can be matched across runs.
pub fn check_unique_ids(deals: &[Deal]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for d in deals {
        if !seen.insert(d.id()) {
            return Err(Error::invalid("deals", format!("duplicate deal id {}", d.id())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::market_data::{
        AmericanOption, AsianFamily, AsianOption, Averaging, CallPut, Date, EuropeanOption, ForwardCurve,
    };
    use crate::reference_pricing::black_scholes_price;

    fn valuation() -> Date {
        Date::from_yyyymmdd(20220926).unwrap()
    }

    fn setup() -> (LocalVolSurface, DiscountCurve) {
        let v = valuation();
        let fwd = Arc::new(ForwardCurve::new(v, vec![(v, 7.115), (v.add_days(400), 7.0)]).unwrap());
        let surface = LocalVolSurface::flat(
            vec![0.0, 1.0],
            LocalVolSurface::uniform_state_pillars(11),
            0.045,
            0.045,
            fwd,
        )
        .unwrap();
        (surface, DiscountCurve::flat_rate(v, v.add_days(400), 0.019).unwrap())
    }

    fn deals() -> Vec<Deal> {
        let v = valuation();
        let exp = v.add_days(91);
        vec![
            Deal::European(EuropeanOption {
                id: "E".into(),
                notional: 1e6,
                strike: 7.1,
                expiry: exp,
                call_put: CallPut::Call,
            }),
            Deal::American(AmericanOption {
                id: "A".into(),
                notional: 1e6,
                strike: 7.1,
                exercise_start: exp,
                exercise_end: exp,
                call_put: CallPut::Call,
            }),
            Deal::Asian(AsianOption {
                id: "S".into(),
                notional: 1e6,
                strike: Some(7.1),
                fixing_dates: (1..=13).map(|w| v.add_days(7 * w)).collect(),
                averaging: Averaging::Arithmetic,
                family: AsianFamily::Spot,
                expiry: v.add_days(91),
                call_put: CallPut::Call,
                historical_fixings: BTreeMap::new(),
                payment_date: None,
            }),
        ]
    }

    #[test]
    fn deals_route_to_their_backends() {
        let (surface, discount) = setup();
        let settings = PricingSettings {
            paths: 4000,
            ..PricingSettings::default()
        };
        let prices = price_deals(&surface, &discount, &deals(), &settings).unwrap();
        assert_eq!(
            prices.iter().map(|p| p.backend).collect::<Vec<_>>(),
            [Backend::Grid, Backend::Grid, Backend::MonteCarlo]
        );
        assert!(prices[2].std_error.is_some() && prices[2].seed == Some(1));
        // Collapsed exercise window prices as the European.
        assert!((prices[0].pv - prices[1].pv).abs() < 1e-6 * prices[0].pv);

        let f = surface.forward().forward_at(valuation().add_days(91)).unwrap();
        let df = discount.df_at(valuation().add_days(91)).unwrap();
        let bs = 1e6 * black_scholes_price(f, 7.1, 0.045, 91.0 / 365.0, df, CallPut::Call).unwrap();
        assert!((prices[0].pv - bs).abs() < 1e-4 * 1e6 * 7.115);
    }

    #[test]
    fn monte_carlo_european_reports_standard_error() {
        let (surface, discount) = setup();
        let settings = PricingSettings {
            paths: 4000,
            european_backend: Backend::MonteCarlo,
            ..PricingSettings::default()
        };
        let prices = price_deals(&surface, &discount, &deals()[..1], &settings).unwrap();
        assert_eq!(prices[0].backend, Backend::MonteCarlo);
        assert!(prices[0].std_error.unwrap() > 0.0);
    }

    #[test]
    fn convergence_rows_cover_each_resolution() {
        let (surface, discount) = setup();
        let rows = convergence_study(
            &surface,
            &discount,
            &deals(),
            &PricingSettings::default(),
            &[20, 40],
            &[1000, 2000],
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].resolutions, [20, 40]);
        assert_eq!(rows[2].resolutions, [1000, 2000]);
        assert!(rows
            .iter()
            .all(|r| r.max_deviation_bp >= 0.0 && r.max_deviation_bp.is_finite()));
        let summary = convergence_summary_csv(&rows);
        assert_eq!(summary.lines().count(), 4);
        assert_eq!(convergence_prices_csv(&rows).lines().count(), 7);
    }

    #[test]
    fn deviation_in_basis_points() {
        assert!((max_deviation_bp(&[100.0, 107.115, 103.0], 1e4, 7.115) - 1.0).abs() < 1e-12);
        assert_eq!(max_deviation_bp(&[5.0], 1.0, 1.0), 0.0);
    }

    #[test]
    fn prices_csv_has_ten_significant_digits() {
        let p = DealPrice {
            id: "X".into(),
            kind: "asian".into(),
            pv: 12345.678901234,
            backend: Backend::MonteCarlo,
            resolution: 5000,
            std_error: Some(1.5),
            seed: Some(3),
        };
        let csv = prices_csv(&[p]);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "X,asian,monte_carlo,5000,1.234567890e4,1.500000000e0,3"
        );
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut d = deals();
        d.push(d[0].clone());
        assert!(check_unique_ids(&d).is_err());
        assert!(check_unique_ids(&deals()).is_ok());
    }
}
