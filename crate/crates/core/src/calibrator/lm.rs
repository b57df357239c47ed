use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonlinear least-squares problem `min ‖f(x)‖²`.
pub trait LeastSquaresProblem: Sync {
    fn residual_count(&self) -> usize;

    fn param_count(&self) -> usize;

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Moves `x` into the feasible set; returns how many coordinates changed.
    fn project(&self, _x: &mut [f64]) -> usize {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Initial damping. `None` uses `1e-3 · trace(AᵀA) / n`.
    pub alpha0: Option<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub max_iterations: usize,
    pub tol_f: f64,
    pub tol_x: f64,
    pub bump_abs: f64,
    pub bump_rel: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            alpha0: None,
            alpha_min: 1e-12,
            alpha_max: 1e12,
            max_iterations: 100,
            tol_f: 1e-6,
            tol_x: 1e-8,
            bump_abs: 1e-4,
            bump_rel: 1e-3,
        }
    }
}

impl SolverSettings {
    pub fn bump(&self, xj: f64) -> f64 {
        self.bump_abs.max(self.bump_rel * xj.abs())
    }

    pub fn bump_rule(&self) -> String {
        format!(
            "forward difference, h = max({:e}, {:e}·|x_j|)",
            self.bump_abs, self.bump_rel
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    /// ‖f‖ fell below `tol_f`.
    ResidualTolerance,
    /// The proposed step fell below `tol_x`.
    StepTolerance,
    MaxIterations,
    /// Damping exceeded `alpha_max` without an acceptable step.
    Stalled,
}

/// One attempted step. `cost` is ‖f‖² at the trial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub alpha: f64,
    pub cost: f64,
    pub step_norm: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub initial_cost: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub status: SolverStatus,
    pub projections: usize,
}

pub fn sum_squares(f: &[f64]) -> f64 {
    f.iter().map(|v| v * v).sum()
}

/// Root-mean-square of the residuals.
pub fn avg_error(f: &[f64]) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::domain("avg_error", "no residuals"));
    }
    Ok((sum_squares(f) / f.len() as f64).sqrt())
}

/// Forward-difference Jacobian, columns evaluated in parallel.
pub fn jacobian_fd<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    f0: &[f64],
    settings: &SolverSettings,
) -> Result<DMatrix<f64>> {
    let m = f0.len();
    let columns = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let h = settings.bump(x[j]);
            let mut bumped = x.to_vec();
            bumped[j] += h;
            let fj = problem.residuals(&bumped).map_err(|e| Error::JacobianColumn {
                column: j,
                source: Box::new(e),
            })?;
            Ok(fj.iter().zip(f0).map(|(a, b)| (a - b) / h).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(DMatrix::from_fn(m, x.len(), |i, j| columns[j][i]))
}

/// Solves `(AᵀA + αI) w = −Aᵀf` by Cholesky. `None` if the factorization fails.
pub fn lm_step(a: &DMatrix<f64>, f: &[f64], alpha: f64) -> Option<DVector<f64>> {
    let f = DVector::from_column_slice(f);
    let gradient = a.tr_mul(&f);
    damped_solve(&a.tr_mul(a), &gradient, alpha)
}

fn damped_solve(normal: &DMatrix<f64>, gradient: &DVector<f64>, alpha: f64) -> Option<DVector<f64>> {
    let mut system = normal.clone();
    for i in 0..system.nrows() {
        system[(i, i)] += alpha;
    }
    let w = system.cholesky()?.solve(&(-gradient));
    w.iter().all(|v| v.is_finite()).then_some(w)
}

/// Accepts iff `wᵀ(−Aᵀf + αw) > 0` and the trial does not increase ‖f‖².
pub fn lm_checks(w: &[f64], a: &DMatrix<f64>, f_at_x: &[f64], f_at_trial: &[f64], alpha: f64) -> bool {
    let gradient = a.tr_mul(&DVector::from_column_slice(f_at_x));
    direction_check(w, &gradient, alpha) && sum_squares(f_at_trial) <= sum_squares(f_at_x)
}

fn direction_check(w: &[f64], gradient: &DVector<f64>, alpha: f64) -> bool {
    let dot: f64 = w
        .iter()
        .zip(gradient.iter())
        .map(|(wi, gi)| wi * (-gi + alpha * wi))
        .sum();
    dot > 0.0
}

/// Levenberg-Marquardt: halve α after an accepted step, double it after a
/// rejected one.
pub fn levenberg_marquardt<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<LmOutcome> {
    if x0.len() != problem.param_count() {
        return Err(Error::Shape {
            expected: problem.param_count(),
            actual: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut projections = problem.project(&mut x);
    let mut f = problem
        .residuals(&x)
        .map_err(|e| Error::Initialization(format!("residuals at the initial point: {e}")))?;
    if f.len() != problem.residual_count() {
        return Err(Error::Shape {
            expected: problem.residual_count(),
            actual: f.len(),
        });
    }
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::Initialization(format!(
            "residual {i} is not finite at the initial point"
        )));
    }
    let initial_cost = sum_squares(&f);
    let mut cost = initial_cost;
    let mut alpha = settings.alpha0;
    let mut trace = Vec::new();
    let (mut accepted_steps, mut rejected_steps, mut iterations) = (0, 0, 0);
    let mut status = SolverStatus::MaxIterations;

    'outer: while iterations < settings.max_iterations {
        if cost.sqrt() <= settings.tol_f {
            status = SolverStatus::ResidualTolerance;
            break;
        }
        iterations += 1;
        let a = jacobian_fd(problem, &x, &f, settings)?;
        let normal = a.tr_mul(&a);
        let gradient = a.tr_mul(&DVector::from_column_slice(&f));
        let mut current = alpha.unwrap_or_else(|| 1e-3 * normal.trace() / x.len() as f64);
        current = current.clamp(settings.alpha_min, settings.alpha_max);

        loop {
            let Some(w) = damped_solve(&normal, &gradient, current) else {
                current *= 2.0;
                if current > settings.alpha_max {
                    status = SolverStatus::Stalled;
                    break 'outer;
                }
                continue;
            };
            let step_norm = w.amax();
            if step_norm <= settings.tol_x {
                status = SolverStatus::StepTolerance;
                break 'outer;
            }
            let mut trial: Vec<f64> = x.iter().zip(w.iter()).map(|(xi, wi)| xi + wi).collect();
            let projected = problem.project(&mut trial);
            let trial_f = problem
                .residuals(&trial)
                .ok()
                .filter(|r| r.iter().all(|v| v.is_finite()));
            let trial_cost = trial_f.as_deref().map_or(f64::INFINITY, sum_squares);
            let accepted = trial_f.is_some() && direction_check(w.as_slice(), &gradient, current) && trial_cost <= cost;
            trace.push(TraceEntry {
                iteration: iterations,
                alpha: current,
                cost: trial_cost,
                step_norm,
                accepted,
            });
            if accepted {
                accepted_steps += 1;
                projections += projected;
                x = trial;
                f = trial_f.expect("accepted steps have residuals");
                cost = trial_cost;
                alpha = Some((current / 2.0).max(settings.alpha_min));
                break;
            }
            rejected_steps += 1;
            current *= 2.0;
            if current > settings.alpha_max {
                status = SolverStatus::Stalled;
                break 'outer;
            }
        }
    }
    if status == SolverStatus::MaxIterations && cost.sqrt() <= settings.tol_f {
        status = SolverStatus::ResidualTolerance;
    }

    Ok(LmOutcome {
        x,
        residuals: f,
        initial_cost,
        trace,
        iterations,
        accepted_steps,
        rejected_steps,
        status,
        projections,
    })
}
