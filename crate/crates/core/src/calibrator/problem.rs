use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_pricer::{build_time_grid, price_european_on_grid, GridField, TimeGrid, DEFAULT_MAX_GAP_DAYS};
use crate::market_data::{year_fraction, DiscountCurve, ForwardCurve, InstrumentSelection, MarketSnapshot, Vanilla};
use crate::mc_pricer::{build_mc_time_steps, generate_paths, price_european_mc, RngSpec};
use crate::reference_pricing::{market_price_vector, MarketPrices};
use crate::vol_surface::{LocalVolSurface, ParamVector, DEFAULT_STATE_PILLARS, DEFAULT_TIME_PILLARS, VOL_FLOOR};

use super::lm::LeastSquaresProblem;

/// Model pricer used inside the calibration loop. Resolution and seed stay
/// fixed for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PricerBackend {
    Grid { half_width: usize, max_gap_days: u32 },
    MonteCarlo { paths: usize, seed: u64, max_gap_days: u32 },
}

impl PricerBackend {
    pub fn grid(half_width: usize) -> Self {
        PricerBackend::Grid {
            half_width,
            max_gap_days: DEFAULT_MAX_GAP_DAYS,
        }
    }

    pub fn monte_carlo(paths: usize, seed: u64) -> Self {
        PricerBackend::MonteCarlo {
            paths,
            seed,
            max_gap_days: DEFAULT_MAX_GAP_DAYS,
        }
    }

    fn max_gap_days(&self) -> u32 {
        match self {
            PricerBackend::Grid { max_gap_days, .. } | PricerBackend::MonteCarlo { max_gap_days, .. } => *max_gap_days,
        }
    }
}

/// Calibration targets, model pricer and the surface layout being fitted.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    market: MarketPrices,
    forward: Arc<ForwardCurve>,
    discount: Arc<DiscountCurve>,
    backend: PricerBackend,
    initial: LocalVolSurface,
    time_grid: TimeGrid,
    vanillas: Vec<Vanilla>,
}

impl CalibrationProblem {
    /// Targets are Black-Scholes prices of the selected quotes.
    pub fn from_market(
        snapshot: &MarketSnapshot,
        selection: &InstrumentSelection,
        backend: PricerBackend,
        initial: LocalVolSurface,
    ) -> Result<Self> {
        let market = market_price_vector(snapshot, selection)?;
        Self::new(
            market,
            snapshot.forward.clone(),
            snapshot.discount.clone(),
            backend,
            initial,
        )
    }

    pub fn new(
        market: MarketPrices,
        forward: Arc<ForwardCurve>,
        discount: Arc<DiscountCurve>,
        backend: PricerBackend,
        initial: LocalVolSurface,
    ) -> Result<Self> {
        if market.is_empty() {
            return Err(Error::invalid("calibration", "no instruments selected"));
        }
        if let Some((spec, c)) = market
            .instruments
            .iter()
            .zip(&market.prices)
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(Error::invalid(
                "calibration",
                format!("market price {c} of {} must be positive", spec.label()),
            ));
        }
        let expiries: Vec<_> = market.instruments.iter().map(|s| s.expiry).collect();
        let valuation = forward.valuation();
        let time_grid = match &backend {
            PricerBackend::Grid {
                half_width,
                max_gap_days,
            } => {
                if *half_width == 0 {
                    return Err(Error::invalid("grid backend", "half width must be positive"));
                }
                build_time_grid(valuation, &expiries, *max_gap_days)?
            }
            PricerBackend::MonteCarlo { paths, .. } => {
                if *paths < 2 {
                    return Err(Error::invalid("monte-carlo backend", "at least two paths are required"));
                }
                build_mc_time_steps(valuation, &[], &expiries, backend.max_gap_days())?
            }
        };
        let vanillas = market.instruments.iter().map(|s| s.vanilla()).collect();
        Ok(CalibrationProblem {
            market,
            forward,
            discount,
            backend,
            initial,
            time_grid,
            vanillas,
        })
    }

    pub fn market(&self) -> &MarketPrices {
        &self.market
    }

    pub fn backend(&self) -> &PricerBackend {
        &self.backend
    }

    pub fn initial_surface(&self) -> &LocalVolSurface {
        &self.initial
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn forward(&self) -> &Arc<ForwardCurve> {
        &self.forward
    }

    pub fn discount(&self) -> &Arc<DiscountCurve> {
        &self.discount
    }

    /// Replaces the target prices, keeping instruments and order.
    pub fn with_targets(mut self, prices: Vec<f64>) -> Result<Self> {
        if prices.len() != self.market.len() {
            return Err(Error::Shape {
                expected: self.market.len(),
                actual: prices.len(),
            });
        }
        self.market.prices = prices;
        Self::new(self.market, self.forward, self.discount, self.backend, self.initial)
    }

    /// Model prices of the calibration instruments per unit notional.
    pub fn model_prices(&self, surface: &LocalVolSurface) -> Result<Vec<f64>> {
        let prices = match &self.backend {
            PricerBackend::Grid { half_width, .. } => {
                let field = GridField::build(&self.time_grid, surface, &self.forward, *half_width, false)?;
                price_european_on_grid(&field, &self.vanillas, &self.discount)?
            }
            PricerBackend::MonteCarlo { paths, seed, .. } => {
                let set = generate_paths(surface, &self.forward, &self.time_grid, *paths, &RngSpec::new(*seed))?;
                price_european_mc(&set, &self.vanillas, &self.discount)?
                    .into_iter()
                    .map(|p| p.pv)
                    .collect()
            }
        };
        for (spec, y) in self.market.instruments.iter().zip(&prices) {
            if !y.is_finite() {
                return Err(Error::Instrument {
                    instrument: spec.label(),
                    source: Box::new(Error::domain("model price", format!("{y} is not finite"))),
                });
            }
        }
        Ok(prices)
    }

    /// `f_i = y_i / c_i − 1`.
    pub fn residuals_for(&self, surface: &LocalVolSurface) -> Result<Vec<f64>> {
        let y = self.model_prices(surface)?;
        Ok(y.iter().zip(&self.market.prices).map(|(y, c)| y / c - 1.0).collect())
    }

    pub fn surface_at(&self, x: &[f64]) -> Result<LocalVolSurface> {
        self.initial.from_params(&ParamVector::new(x.to_vec()))
    }
}

impl LeastSquaresProblem for CalibrationProblem {
    fn residual_count(&self) -> usize {
        self.market.len()
    }

    fn param_count(&self) -> usize {
        self.initial.param_count()
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.residuals_for(&self.surface_at(x)?)
    }

    fn project(&self, x: &mut [f64]) -> usize {
        let mut raised = 0;
        for v in x.iter_mut().filter(|v| v.is_nan() || **v < VOL_FLOOR) {
            *v = VOL_FLOOR;
            raised += 1;
        }
        raised
    }
}

/// Starting surface: constant in state, equal at each time pillar to the
/// ATM volatility interpolated linearly in time between tenor expiries
/// (flat beyond the first and last). `c0` is the longest-tenor ATM vol.
pub fn initial_surface(
    snapshot: &MarketSnapshot,
    time_pillar_count: usize,
    state_pillar_count: usize,
) -> Result<LocalVolSurface> {
    let atm = snapshot
        .atm_quotes()
        .into_iter()
        .map(|q| Ok((year_fraction(snapshot.valuation, q.expiry)?, q.vol)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    if atm.is_empty() {
        return Err(Error::invalid("initial surface", "no ATM quotes"));
    }
    let expiries: Vec<f64> = atm.iter().map(|(t, _)| *t).collect();
    let time_pillars = LocalVolSurface::default_time_pillars(&expiries, time_pillar_count);
    let state_pillars = LocalVolSurface::uniform_state_pillars(state_pillar_count);
    let vols = time_pillars
        .iter()
        .map(|t| vec![interpolate_atm(&atm, *t); state_pillars.len()])
        .collect();
    let c0 = atm.last().expect("non-empty").1;
    LocalVolSurface::new(time_pillars, state_pillars, vols, c0, snapshot.forward.clone())
}

/// [`initial_surface`] with the default 18 × 11 layout.
pub fn default_initial_surface(snapshot: &MarketSnapshot) -> Result<LocalVolSurface> {
    initial_surface(snapshot, DEFAULT_TIME_PILLARS, DEFAULT_STATE_PILLARS)
}

fn interpolate_atm(atm: &[(f64, f64)], t: f64) -> f64 {
    let (first, last) = (atm[0], atm[atm.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = atm.partition_point(|(ti, _)| *ti <= t);
    let ((t0, v0), (t1, v1)) = (atm[i - 1], atm[i]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}
