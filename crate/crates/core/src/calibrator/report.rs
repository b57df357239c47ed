use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market_data::{CallPut, Date};
use crate::vol_surface::{ParamVector, SurfaceFile, VOL_FLOOR};

use super::lm::{avg_error, levenberg_marquardt, SolverSettings, SolverStatus, TraceEntry};
use super::problem::{CalibrationProblem, PricerBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentFit {
    pub instrument: String,
    pub expiry: Date,
    pub strike: f64,
    pub call_put: CallPut,
    pub market_price: f64,
    pub model_price: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub params: ParamVector,
    pub surface: SurfaceFile,
    pub instruments: Vec<InstrumentFit>,
    pub errors: Vec<f64>,
    pub avg_error: f64,
    pub initial_avg_error: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub status: SolverStatus,
    /// Coordinates raised to the volatility floor over the run.
    pub floor_events: usize,
    pub vol_floor: f64,
    pub bump_rule: String,
    pub backend: PricerBackend,
    pub settings: SolverSettings,
}

impl CalibrationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `iteration,alpha,cost,step_norm,accepted`, one row per attempted step.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,alpha,cost,step_norm,accepted\n");
        for e in &self.trace {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{}",
                e.iteration, e.alpha, e.cost, e.step_norm, e.accepted
            );
        }
        out
    }

    /// ‖f‖² after each accepted step.
    pub fn accepted_costs(&self) -> Vec<f64> {
        self.trace.iter().filter(|e| e.accepted).map(|e| e.cost).collect()
    }
}

/// Fits the surface parameters to the problem's market prices.
pub fn calibrate(problem: &CalibrationProblem, settings: &SolverSettings) -> Result<CalibrationReport> {
    let x0 = problem.initial_surface().to_params().into_vec();
    let outcome = levenberg_marquardt(problem, &x0, settings)?;
    let (surface, raised) = problem
        .initial_surface()
        .from_params_floored(&ParamVector::new(outcome.x.clone()), VOL_FLOOR)?;
    let model = problem.model_prices(&surface)?;
    let market = problem.market();
    let instruments = market
        .instruments
        .iter()
        .zip(&market.prices)
        .zip(&model)
        .zip(&outcome.residuals)
        .map(|(((spec, c), y), f)| InstrumentFit {
            instrument: spec.label(),
            expiry: spec.expiry,
            strike: spec.strike,
            call_put: spec.call_put,
            market_price: *c,
            model_price: *y,
            error: *f,
        })
        .collect();
    Ok(CalibrationReport {
        params: surface.to_params(),
        surface: surface.to_file(),
        instruments,
        avg_error: avg_error(&outcome.residuals)?,
        initial_avg_error: (outcome.initial_cost / outcome.residuals.len() as f64).sqrt(),
        errors: outcome.residuals,
        trace: outcome.trace,
        iterations: outcome.iterations,
        accepted_steps: outcome.accepted_steps,
        rejected_steps: outcome.rejected_steps,
        status: outcome.status,
        floor_events: outcome.projections + raised,
        vol_floor: VOL_FLOOR,
        bump_rule: settings.bump_rule(),
        backend: problem.backend().clone(),
        settings: settings.clone(),
    })
}
