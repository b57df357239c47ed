//! Levenberg-Marquardt fit of the local volatility surface to market prices.

mod lm;
mod problem;
mod report;

pub use lm::{
    avg_error, jacobian_fd, levenberg_marquardt, lm_checks, lm_step, sum_squares, LeastSquaresProblem, LmOutcome,
    SolverSettings, SolverStatus, TraceEntry,
};
pub use problem::{default_initial_surface, initial_surface, CalibrationProblem, PricerBackend};
pub use report::{calibrate, CalibrationReport, InstrumentFit};

#[cfg(test)]
mod tests;
