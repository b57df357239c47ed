use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::market_data::ForwardCurve;
use crate::vol_surface::LocalVolSurface;

use super::stencil::{interp_weights, quaternary_branches};
use super::time_grid::TimeGrid;

/// Width of the state grid in standard deviations of `x(t)`.
pub const WIDTH_IN_STD_DEVS: f64 = 5.0;

/// One time slice of the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSlice {
    /// Cumulative variance bound of `x` at this slice.
    pub variance: f64,
    /// Node spacing; zero on the single-node root slice.
    pub dx: f64,
    /// Node coordinates `x_i`, symmetric about zero.
    pub coords: Vec<f64>,
    /// `μⁿ`, set by forward propagation.
    pub drift: f64,
    /// FX states `exp(x_i + μⁿ)`, set by forward propagation.
    pub states: Vec<f64>,
    /// Arrival probabilities from the root, set by forward propagation.
    pub arrival: Vec<f64>,
    /// Branch endpoints that fell outside the slice and used the edge stencil
    /// (counted on the transition into this slice).
    pub clamp_events: usize,
}

impl GridSlice {
    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    fn center(&self) -> usize {
        self.coords.len() / 2
    }
}

/// Sparse row of transition weights into the next slice. Weights sum to one
/// but individual entries can be negative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionRow {
    pub entries: Vec<(usize, f64)>,
}

impl TransitionRow {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }
}

/// All rows from one slice to the next, stored compressed.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct TransitionMatrix {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl TransitionMatrix {
    fn push(&mut self, row: &TransitionRow) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        for &(j, w) in &row.entries {
            self.targets.push(j);
            self.weights.push(w);
        }
        self.offsets.push(self.targets.len());
    }

    pub(crate) fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        self.targets[a..b]
            .iter()
            .copied()
            .zip(self.weights[a..b].iter().copied())
    }
}

/// Transition row from a node at `source_x` with local vol `vol` over `dt`
/// onto `target`. Returns the row and the number of branch endpoints that
/// needed the edge stencil.
pub fn transition_row_onto(source_x: f64, vol: f64, dt: f64, target: &GridSlice) -> (TransitionRow, usize) {
    let (offsets, branch_weights) = quaternary_branches(dt, vol);
    let nodes = target.node_count();
    let last = nodes as i64 - 1;
    let mut raw: [(usize, f64); 12] = [(0, 0.0); 12];
    let mut clamps = 0;
    for (b, (offset, p)) in offsets.iter().zip(branch_weights).enumerate() {
        let x = source_x + offset;
        let nearest = (x / target.dx).round() as i64 + target.center() as i64;
        let center = nearest.clamp(1, last - 1);
        if center != nearest {
            clamps += 1;
        }
        let xi = (x - target.coords[center as usize]) / target.dx;
        let w = interp_weights(xi);
        for (k, wk) in w.iter().enumerate() {
            raw[3 * b + k] = ((center - 1) as usize + k, p * wk);
        }
    }
    raw.sort_by_key(|e| e.0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(12);
    for (j, w) in raw {
        match entries.last_mut() {
            Some(last) if last.0 == j => last.1 += w,
            _ => entries.push((j, w)),
        }
    }
    (TransitionRow { entries }, clamps)
}

/// The tree-like state lattice over a time grid.
#[derive(Debug, Clone)]
pub struct GridField {
    time_grid: TimeGrid,
    half_width: usize,
    slices: Vec<GridSlice>,
    transitions: Vec<TransitionMatrix>,
    propagated: bool,
}

/// Lattice coordinates and variances, before drifts are known.
///
/// The variance grows by `σ_max² Δt` per step where `σ_max` is the largest
/// surface value over the state pillars at the slice's time.
pub fn build_state_grid(time_grid: &TimeGrid, surface: &LocalVolSurface, half_width: usize) -> Result<GridField> {
    if half_width < 1 {
        return Err(Error::invalid("state grid", "half width must be at least 1"));
    }
    let mut slices = Vec::with_capacity(time_grid.len());
    slices.push(GridSlice {
        variance: 0.0,
        dx: 0.0,
        coords: vec![0.0],
        drift: f64::NAN,
        states: vec![],
        arrival: vec![],
        clamp_events: 0,
    });
    let mut variance = 0.0;
    for n in 1..time_grid.len() {
        let vol_max = surface.max_vol_at(time_grid.times()[n]);
        variance += vol_max * vol_max * time_grid.dt(n - 1);
        let dx = WIDTH_IN_STD_DEVS * variance.sqrt() / half_width as f64;
        let coords = (-(half_width as i64)..=half_width as i64)
            .map(|i| i as f64 * dx)
            .collect();
        slices.push(GridSlice {
            variance,
            dx,
            coords,
            drift: f64::NAN,
            states: vec![],
            arrival: vec![],
            clamp_events: 0,
        });
    }
    Ok(GridField {
        time_grid: time_grid.clone(),
        half_width,
        slices,
        transitions: Vec::new(),
        propagated: false,
    })
}

/// Fills drifts, states and arrival probabilities slice by slice so that the
/// expected FX state equals the forward at every date.
///
/// With `keep_transitions` the transition matrices are stored for backward
/// induction; calibration only needs arrival probabilities.
pub fn forward_propagate(
    mut field: GridField,
    surface: &LocalVolSurface,
    forward: &ForwardCurve,
    keep_transitions: bool,
) -> Result<GridField> {
    let grid = field.time_grid.clone();
    let f0 = forward.forward_at(grid.dates()[0])?;
    {
        let root = &mut field.slices[0];
        root.drift = f0.ln();
        root.states = vec![f0];
        root.arrival = vec![1.0];
    }
    field.transitions.clear();
    for n in 0..grid.len() - 1 {
        let dt = grid.dt(n);
        let vols = surface.slice(grid.times()[n]);
        let (source, rest) = field.slices.split_at_mut(n + 1);
        let source = &source[n];
        let target = &mut rest[0];
        let mut arrival = vec![0.0; target.node_count()];
        let mut matrix = TransitionMatrix::default();
        let mut clamps = 0;
        for (i, (&x, &s)) in source.coords.iter().zip(&source.states).enumerate() {
            let (row, c) = transition_row_onto(x, vols.vol(s), dt, target);
            clamps += c;
            let q = source.arrival[i];
            for &(j, w) in &row.entries {
                arrival[j] += q * w;
            }
            if keep_transitions {
                matrix.push(&row);
            }
        }
        let expectation: f64 = arrival.iter().zip(&target.coords).map(|(q, x)| q * x.exp()).sum();
        let f = forward.forward_at(grid.dates()[n + 1])?;
        if !(expectation > 0.0 && expectation.is_finite()) {
            return Err(Error::DegenerateGrid {
                slice: n + 1,
                reason: format!(
                    "sum of q·exp(x) = {expectation}; arrival mass {}, {clamps} edge clamps",
                    arrival.iter().sum::<f64>()
                ),
            });
        }
        target.drift = (f / expectation).ln();
        target.states = target.coords.iter().map(|x| (x + target.drift).exp()).collect();
        target.arrival = arrival;
        target.clamp_events = clamps;
        if keep_transitions {
            field.transitions.push(matrix);
        }
    }
    field.propagated = true;
    Ok(field)
}

/// Per-slice diagnostics of a propagated field.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceDiagnostics {
    pub slice: usize,
    pub date: crate::market_data::Date,
    pub drift: f64,
    pub arrival_sum: f64,
    pub martingale_error: f64,
    pub clamp_events: usize,
}

impl GridField {
    /// Builds the lattice and runs forward propagation.
    pub fn build(
        time_grid: &TimeGrid,
        surface: &LocalVolSurface,
        forward: &ForwardCurve,
        half_width: usize,
        keep_transitions: bool,
    ) -> Result<Self> {
        forward_propagate(
            build_state_grid(time_grid, surface, half_width)?,
            surface,
            forward,
            keep_transitions,
        )
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn slices(&self) -> &[GridSlice] {
        &self.slices
    }

    pub fn slice(&self, n: usize) -> &GridSlice {
        &self.slices[n]
    }

    pub fn is_propagated(&self) -> bool {
        self.propagated
    }

    pub fn has_transitions(&self) -> bool {
        self.propagated && self.transitions.len() + 1 == self.slices.len()
    }

    pub(crate) fn transitions(&self, n: usize) -> &TransitionMatrix {
        &self.transitions[n]
    }

    /// Transition row from node `i` of slice `n` to slice `n + 1`,
    /// recomputed from the surface. Slice `n` must already have states.
    pub fn transition_row(&self, surface: &LocalVolSurface, n: usize, i: usize) -> Result<TransitionRow> {
        let source = &self.slices[n];
        if source.states.is_empty() || n + 1 >= self.slices.len() {
            return Err(Error::invalid(
                "transition row",
                format!("slice {n} has no states or no successor"),
            ));
        }
        let t = self.time_grid.times()[n];
        let vol = surface.local_vol(t, source.states[i]);
        Ok(transition_row_onto(source.coords[i], vol, self.time_grid.dt(n), &self.slices[n + 1]).0)
    }

    pub fn diagnostics(&self, forward: &ForwardCurve) -> Result<Vec<SliceDiagnostics>> {
        self.slices
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let date = self.time_grid.dates()[n];
                let f = forward.forward_at(date)?;
                let mean: f64 = s.arrival.iter().zip(&s.states).map(|(q, x)| q * x).sum();
                Ok(SliceDiagnostics {
                    slice: n,
                    date,
                    drift: s.drift,
                    arrival_sum: s.arrival.iter().sum(),
                    martingale_error: mean / f - 1.0,
                    clamp_events: s.clamp_events,
                })
            })
            .collect()
    }

    /// Diagnostics as CSV: `slice,date,drift,arrival_sum,martingale_error,clamp_events`.
    pub fn diagnostics_csv(&self, forward: &ForwardCurve) -> Result<String> {
        let mut out = String::from("slice,date,drift,arrival_sum,martingale_error,clamp_events\n");
        for d in self.diagnostics(forward)? {
            let _ = writeln!(
                out,
                "{},{},{:.15e},{:.15e},{:.3e},{}",
                d.slice, d.date, d.drift, d.arrival_sum, d.martingale_error, d.clamp_events
            );
        }
        Ok(out)
    }
}
