use std::io::Write;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_pricer::{build_time_grid, TimeGrid};
use crate::market_data::{Date, ForwardCurve};
use crate::normal::normal_inv_unchecked;
use crate::vol_surface::LocalVolSurface;

/// Identifier recorded with every Monte-Carlo result.
pub const RNG_ALGORITHM: &str = "chacha8/stream-per-path/inverse-cdf-normal";

/// Seed and generator description. Path `i` draws from ChaCha8 stream `i`
/// of the master seed, so results do not depend on thread scheduling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub algorithm: String,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        RngSpec {
            seed,
            algorithm: RNG_ALGORITHM.to_string(),
        }
    }

    fn stream(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng
    }
}

/// Simulation dates: valuation, every future fixing and expiry, filled so no
/// gap exceeds `max_gap_days`. Fixings before valuation are left out.
pub fn build_mc_time_steps(
    valuation: Date,
    fixing_dates: &[Date],
    expiries: &[Date],
    max_gap_days: u32,
) -> Result<TimeGrid> {
    let specials: Vec<Date> = fixing_dates
        .iter()
        .chain(expiries)
        .copied()
        .filter(|d| *d >= valuation)
        .collect();
    build_time_grid(valuation, &specials, max_gap_days)
}

/// FX paths on a shared time grid, drift-corrected to the forward curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    time_grid: TimeGrid,
    paths: usize,
    /// Step-major: `states[n * paths + i]`.
    states: Vec<f64>,
    lambdas: Vec<f64>,
    rng: RngSpec,
}

impl PathSet {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn path_count(&self) -> usize {
        self.paths
    }

    pub fn rng(&self) -> &RngSpec {
        &self.rng
    }

    /// States of all paths at step `n`.
    pub fn step(&self, n: usize) -> &[f64] {
        &self.states[n * self.paths..(n + 1) * self.paths]
    }

    pub fn state(&self, n: usize, path: usize) -> f64 {
        self.states[n * self.paths + path]
    }

    /// Drift-correction factor λ applied at each step (1 at the root).
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn step_of(&self, date: Date) -> Option<usize> {
        self.time_grid.index_of(date)
    }

    /// Writes `path,date,state` rows for the first `max_paths` paths.
    pub fn dump_csv<W: Write>(&self, mut out: W, max_paths: usize) -> Result<()> {
        writeln!(out, "path,date,state")?;
        for i in 0..self.paths.min(max_paths) {
            for (n, d) in self.time_grid.dates().iter().enumerate() {
                writeln!(out, "{i},{d},{:.12e}", self.state(n, i))?;
            }
        }
        Ok(())
    }
}

/// Simulates `paths` paths of the local volatility SDE.
///
/// Each step proposes `X = S exp(-σ²Δt/2 + σ√Δt ξ)` with σ evaluated on the
/// already-corrected state, then rescales all proposals by
/// `λ = F(tⁿ⁺¹) / mean(X)` so the sample mean equals the forward exactly.
/// Proposals run in parallel; the mean is a sequential reduction.
pub fn generate_paths(
    surface: &LocalVolSurface,
    forward: &ForwardCurve,
    time_grid: &TimeGrid,
    paths: usize,
    rng: &RngSpec,
) -> Result<PathSet> {
    if paths == 0 {
        return Err(Error::invalid("path count", "at least one path is required"));
    }
    let steps = time_grid.len();
    let f0 = forward.forward_at(time_grid.dates()[0])?;
    let mut states = Vec::with_capacity(steps * paths);
    states.resize(paths, f0);
    let mut lambdas = vec![1.0];
    let mut streams: Vec<ChaCha8Rng> = (0..paths).map(|i| rng.stream(i)).collect();
    let mut proposals = vec![0.0; paths];

    for n in 0..steps - 1 {
        let dt = time_grid.dt(n);
        let sqrt_dt = dt.sqrt();
        let vols = surface.slice(time_grid.times()[n]);
        let current = &states[n * paths..(n + 1) * paths];
        proposals
            .par_iter_mut()
            .zip(streams.par_iter_mut())
            .zip(current.par_iter())
            .for_each(|((x, stream), &s)| {
                let xi = normal_inv_unchecked(stream.sample(Open01));
                let vol = vols.vol(s);
                *x = s * (-0.5 * vol * vol * dt + vol * sqrt_dt * xi).exp();
            });
        if let Some(bad) = proposals.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::NonFinitePath { path: bad, step: n + 1 });
        }
        let mean = proposals.iter().sum::<f64>() / paths as f64;
        let lambda = forward.forward_at(time_grid.dates()[n + 1])? / mean;
        lambdas.push(lambda);
        states.extend(proposals.iter().map(|x| lambda * x));
    }

    Ok(PathSet {
        time_grid: time_grid.clone(),
        paths,
        states,
        lambdas,
        rng: rng.clone(),
    })
}
