//! Fully parameterized local volatility model for FX options.
//!
//! The crate calibrates a rectangular (time × transformed-state) local
//! volatility surface to a delta-quoted FX volatility matrix with a
//! Levenberg-Marquardt solver, then prices American options on an explicit
//! forward/backward propagation grid and Asian options by Monte-Carlo.
//!
//! Module map:
//!
//! - [`market_data`]: dates, curves, vol quotes, deals, market validation.
//! - [`normal`]: standard normal CDF and its inverse.
//! - [`vol_surface`]: the local volatility surface and its parameter vector.
//! - [`reference_pricing`]: Black-Scholes targets and closed-form oracles.
//! - [`grid_pricer`]: the lattice used for calibration and American deals.
//! - [`mc_pricer`]: path simulation with forward-curve drift correction.
//! - [`calibrator`]: finite-difference Jacobians and the LM loop.
//! - [`study`]: resolution convergence studies over deal sets.

pub mod calibrator;
pub mod error;
pub mod grid_pricer;
pub mod market_data;
pub mod mc_pricer;
pub mod normal;
pub mod reference_pricing;
pub mod study;
pub mod vol_surface;

pub use error::{Error, Result};
