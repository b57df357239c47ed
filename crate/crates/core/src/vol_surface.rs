//! The fully parameterized local volatility surface σ(t, S).
//!
//! The underlying is mapped to a bounded coordinate
//!
//! ```text
//! s = Φ( ln(S / F_t) / (1.3 c0 √(t + 1/365.25)) )
//! ```
//!
//! and σ is stored on a rectangular grid of time pillars × state pillars in
//! `[0, 1]`, bilinearly interpolated in `(t, s)`. Time is clamped to the
//! pillar range.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::ForwardCurve;
use crate::normal::{normal_cdf, normal_inv};

/// Multiplier on `c0` in the state transform.
pub const TRANSFORM_SCALE: f64 = 1.3;
/// Time shift keeping the transform finite at `t = 0`.
pub const TRANSFORM_TIME_SHIFT: f64 = 1.0 / 365.25;
pub const DEFAULT_TIME_PILLARS: usize = 18;
pub const DEFAULT_STATE_PILLARS: usize = 11;
/// Smallest volatility a surface may hold.
pub const VOL_FLOOR: f64 = 1e-6;

/// Surface values flattened time-major: `x[j * K + k] = σ(t_j, s_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

#[derive(Debug, Clone)]
pub struct LocalVolSurface {
    time_pillars: Vec<f64>,
    state_pillars: Vec<f64>,
    vols: Vec<f64>,
    c0: f64,
    forward: Arc<ForwardCurve>,
}

impl PartialEq for LocalVolSurface {
    fn eq(&self, other: &Self) -> bool {
        self.time_pillars == other.time_pillars
            && self.state_pillars == other.state_pillars
            && self.vols == other.vols
            && self.c0 == other.c0
            && (Arc::ptr_eq(&self.forward, &other.forward) || self.forward == other.forward)
    }
}

/// On-disk form of a surface; the forward curve is attached on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub time_pillars: Vec<f64>,
    pub state_pillars: Vec<f64>,
    pub vols: Vec<Vec<f64>>,
    pub c0: f64,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl LocalVolSurface {
    /// `vols[j][k]` is the volatility at time pillar `j`, state pillar `k`.
    pub fn new(
        time_pillars: Vec<f64>,
        state_pillars: Vec<f64>,
        vols: Vec<Vec<f64>>,
        c0: f64,
        forward: Arc<ForwardCurve>,
    ) -> Result<Self> {
        let k = state_pillars.len();
        if time_pillars.is_empty() || !strictly_increasing(&time_pillars) || time_pillars[0] < 0.0 {
            return Err(Error::invalid(
                "surface",
                "time pillars must be non-negative and strictly increasing",
            ));
        }
        if k == 0 || !strictly_increasing(&state_pillars) {
            return Err(Error::invalid("surface", "state pillars must be strictly increasing"));
        }
        if k == 1 {
            if state_pillars[0] < 0.0 || state_pillars[0] > 1.0 {
                return Err(Error::invalid("surface", "state pillar outside [0, 1]"));
            }
        } else if state_pillars[0] != 0.0 || state_pillars[k - 1] != 1.0 {
            return Err(Error::invalid("surface", "state pillars must start at 0 and end at 1"));
        }
        if vols.len() != time_pillars.len() || vols.iter().any(|row| row.len() != k) {
            return Err(Error::invalid(
                "surface",
                format!("vol matrix must be {} x {k}", time_pillars.len()),
            ));
        }
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(Error::invalid("surface", format!("c0 = {c0} must be positive")));
        }
        let vols: Vec<f64> = vols.into_iter().flatten().collect();
        if let Some(v) = vols.iter().find(|v| !(v.is_finite() && **v >= VOL_FLOOR)) {
            return Err(Error::invalid(
                "surface",
                format!("volatility {v} below floor {VOL_FLOOR}"),
            ));
        }
        Ok(LocalVolSurface {
            time_pillars,
            state_pillars,
            vols,
            c0,
            forward,
        })
    }

    pub fn flat(
        time_pillars: Vec<f64>,
        state_pillars: Vec<f64>,
        vol: f64,
        c0: f64,
        forward: Arc<ForwardCurve>,
    ) -> Result<Self> {
        let rows = vec![vec![vol; state_pillars.len()]; time_pillars.len()];
        Self::new(time_pillars, state_pillars, rows, c0, forward)
    }

    /// `count` evenly spaced pillars on `[0, 1]`.
    pub fn uniform_state_pillars(count: usize) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![0.5],
            _ => (0..count).map(|k| k as f64 / (count - 1) as f64).collect(),
        }
    }

    /// Time pillars at zero and at each distinct expiry, padded up to
    /// `count` by repeatedly splitting the longest gap at its geometric
    /// midpoint (arithmetic for the gap starting at zero).
    pub fn default_time_pillars(expiries: &[f64], count: usize) -> Vec<f64> {
        let mut pillars = vec![0.0];
        let mut sorted: Vec<f64> = expiries.iter().copied().filter(|t| *t > 0.0).collect();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        pillars.extend(sorted);
        if pillars.len() == 1 {
            pillars.push(1.0);
        }
        while pillars.len() < count {
            let (at, _) = pillars
                .windows(2)
                .enumerate()
                .map(|(i, w)| (i, w[1] - w[0]))
                .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
            let (lo, hi) = (pillars[at], pillars[at + 1]);
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            pillars.insert(at + 1, mid);
        }
        pillars
    }

    pub fn time_pillars(&self) -> &[f64] {
        &self.time_pillars
    }

    pub fn state_pillars(&self) -> &[f64] {
        &self.state_pillars
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn forward(&self) -> &Arc<ForwardCurve> {
        &self.forward
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.time_pillars.len(), self.state_pillars.len())
    }

    pub fn param_count(&self) -> usize {
        self.vols.len()
    }

    pub fn vol_at_node(&self, j: usize, k: usize) -> f64 {
        self.vols[j * self.state_pillars.len() + k]
    }

    fn transform_scale(&self, t: f64) -> f64 {
        TRANSFORM_SCALE * self.c0 * (t + TRANSFORM_TIME_SHIFT).sqrt()
    }

    /// Maps an FX level to the surface's state coordinate in `(0, 1)`.
    pub fn state_coordinate(&self, t: f64, spot: f64) -> Result<f64> {
        if !(spot.is_finite() && spot > 0.0) {
            return Err(Error::domain(
                "state_coordinate",
                format!("S = {spot} must be positive"),
            ));
        }
        if t.is_nan() || t < 0.0 {
            return Err(Error::domain(
                "state_coordinate",
                format!("t = {t} must be non-negative"),
            ));
        }
        let f = self.forward.forward_at_time(t);
        Ok(normal_cdf((spot / f).ln() / self.transform_scale(t)))
    }

    /// Inverse of [`state_coordinate`](Self::state_coordinate) at fixed `t`.
    pub fn spot_from_coordinate(&self, t: f64, s: f64) -> Result<f64> {
        let z = normal_inv(s)?;
        Ok(self.forward.forward_at_time(t) * (z * self.transform_scale(t)).exp())
    }

    /// The surface frozen at time `t`, for repeated state lookups.
    pub fn slice(&self, t: f64) -> VolSlice<'_> {
        let k = self.state_pillars.len();
        let (lo, w) = bracket(&self.time_pillars, t);
        let row = |j: usize| &self.vols[j * k..(j + 1) * k];
        let values = if w == 0.0 {
            row(lo).to_vec()
        } else {
            row(lo).iter().zip(row(lo + 1)).map(|(a, b)| a + w * (b - a)).collect()
        };
        VolSlice {
            state_pillars: &self.state_pillars,
            values,
            forward: self.forward.forward_at_time(t.max(0.0)),
            inv_scale: 1.0 / self.transform_scale(t.max(0.0)),
        }
    }

    /// σ(t, S). Non-positive `S` maps to the lowest state pillar.
    pub fn local_vol(&self, t: f64, spot: f64) -> f64 {
        self.slice(t).vol(spot)
    }

    /// Largest value of σ(t, ·) over the state pillars.
    pub fn max_vol_at(&self, t: f64) -> f64 {
        self.slice(t).values.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn to_params(&self) -> ParamVector {
        ParamVector(self.vols.clone())
    }

    /// A surface with the same pillars holding `x`. Rejects wrong lengths and
    /// values below [`VOL_FLOOR`].
    pub fn from_params(&self, x: &ParamVector) -> Result<Self> {
        if x.len() != self.vols.len() {
            return Err(Error::Shape {
                expected: self.vols.len(),
                actual: x.len(),
            });
        }
        if let Some((i, v)) =
            x.0.iter()
                .enumerate()
                .find(|(_, v)| !(v.is_finite() && **v >= VOL_FLOOR))
        {
            return Err(Error::invalid(
                "surface parameters",
                format!("x[{i}] = {v} below floor {VOL_FLOOR}"),
            ));
        }
        Ok(LocalVolSurface {
            vols: x.0.clone(),
            ..self.clone()
        })
    }

    /// Like [`from_params`](Self::from_params) but raises entries below
    /// `floor` to it, returning how many were raised.
    pub fn from_params_floored(&self, x: &ParamVector, floor: f64) -> Result<(Self, usize)> {
        let floor = floor.max(VOL_FLOOR);
        let mut raised = 0;
        let values: Vec<f64> =
            x.0.iter()
                .map(|&v| {
                    if v < floor {
                        raised += 1;
                        floor
                    } else {
                        v
                    }
                })
                .collect();
        Ok((self.from_params(&ParamVector(values))?, raised))
    }

    pub fn to_file(&self) -> SurfaceFile {
        let k = self.state_pillars.len();
        SurfaceFile {
            time_pillars: self.time_pillars.clone(),
            state_pillars: self.state_pillars.clone(),
            vols: self.vols.chunks(k).map(<[f64]>::to_vec).collect(),
            c0: self.c0,
        }
    }

    pub fn from_file(file: SurfaceFile, forward: Arc<ForwardCurve>) -> Result<Self> {
        Self::new(file.time_pillars, file.state_pillars, file.vols, file.c0, forward)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("surface serializes")
    }

    pub fn from_json(text: &str, forward: Arc<ForwardCurve>) -> Result<Self> {
        let file: SurfaceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "surface".into(),
            message: e.to_string(),
        })?;
        Self::from_file(file, forward)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path, forward: Arc<ForwardCurve>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, forward).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

/// Index of the bracketing lower pillar and the weight on the upper one,
/// with `x` clamped to the pillar range.
fn bracket(pillars: &[f64], x: f64) -> (usize, f64) {
    let n = pillars.len();
    if n == 1 || x <= pillars[0] {
        return (0, 0.0);
    }
    if x >= pillars[n - 1] {
        return (n - 1, 0.0);
    }
    let hi = pillars.partition_point(|&p| p <= x);
    let lo = hi - 1;
    (lo, (x - pillars[lo]) / (pillars[hi] - pillars[lo]))
}

/// σ(t, ·) at a fixed time.
#[derive(Debug, Clone)]
pub struct VolSlice<'a> {
    state_pillars: &'a [f64],
    values: Vec<f64>,
    forward: f64,
    inv_scale: f64,
}

impl VolSlice<'_> {
    pub fn state_coordinate(&self, spot: f64) -> f64 {
        if spot <= 0.0 {
            return 0.0;
        }
        normal_cdf((spot / self.forward).ln() * self.inv_scale)
    }

    pub fn vol(&self, spot: f64) -> f64 {
        self.vol_at_coordinate(self.state_coordinate(spot))
    }

    pub fn vol_at_coordinate(&self, s: f64) -> f64 {
        let (k, w) = bracket(self.state_pillars, s);
        if w == 0.0 {
            self.values[k]
        } else {
            self.values[k] + w * (self.values[k + 1] - self.values[k])
        }
    }

    pub fn max_vol(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }
}
