use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fxlv::calibrator::{PricerBackend, SolverSettings};
use fxlv::grid_pricer::DEFAULT_MAX_GAP_DAYS;
use fxlv::study::{PricingSettings, GRID_RESOLUTIONS, PATH_COUNTS};
use fxlv::vol_surface::{DEFAULT_STATE_PILLARS, DEFAULT_TIME_PILLARS};

pub const MIN_HALF_WIDTH: usize = 10;
pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub forward: PathBuf,
    pub discount: PathBuf,
    pub vols: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deals: Option<PathBuf>,
    /// Surface used by `price` and `converge`. Defaults to the one
    /// `calibrate` writes into the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    /// `TENOR:KIND` keys left out of the calibration.
    #[serde(default)]
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Grid,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub backend: BackendKind,
    pub grid_half_width: usize,
    pub paths: usize,
    pub seed: u64,
    pub max_gap_days: u32,
    pub time_pillars: usize,
    pub state_pillars: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            backend: BackendKind::Grid,
            grid_half_width: 50,
            paths: 5000,
            seed: 1,
            max_gap_days: DEFAULT_MAX_GAP_DAYS,
            time_pillars: DEFAULT_TIME_PILLARS,
            state_pillars: DEFAULT_STATE_PILLARS,
        }
    }
}

impl Calibration {
    pub fn backend(&self) -> PricerBackend {
        match self.backend {
            BackendKind::Grid => PricerBackend::Grid {
                half_width: self.grid_half_width,
                max_gap_days: self.max_gap_days,
            },
            BackendKind::MonteCarlo => PricerBackend::MonteCarlo {
                paths: self.paths,
                seed: self.seed,
                max_gap_days: self.max_gap_days,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Convergence {
    pub grid_resolutions: Vec<usize>,
    pub path_counts: Vec<usize>,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            grid_resolutions: GRID_RESOLUTIONS.to_vec(),
            path_counts: PATH_COUNTS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub calibration: Calibration,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub pricing: PricingSettings,
    #[serde(default)]
    pub convergence: Convergence,
    #[serde(default)]
    pub output: Output,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads the file and makes every relative path relative to its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut config = Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.inputs.forward);
        join(&mut self.inputs.discount);
        join(&mut self.inputs.vols);
        if let Some(p) = self.inputs.deals.as_mut() {
            join(p);
        }
        if let Some(p) = self.inputs.surface.as_mut() {
            join(p);
        }
        join(&mut self.output.dir);
    }

    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<PathBuf>) {
        if let Some(seed) = seed {
            self.calibration.seed = seed;
            self.pricing.seed = seed;
        }
        if let Some(out) = out {
            self.output.dir = out;
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let half_widths = [self.calibration.grid_half_width, self.pricing.half_width]
            .into_iter()
            .chain(self.convergence.grid_resolutions.iter().copied());
        for i in half_widths {
            if i < MIN_HALF_WIDTH {
                return Err(format!("grid half width {i} is below the minimum {MIN_HALF_WIDTH}"));
            }
        }
        let path_counts = [self.calibration.paths, self.pricing.paths]
            .into_iter()
            .chain(self.convergence.path_counts.iter().copied());
        for n in path_counts {
            if n < MIN_PATHS {
                return Err(format!("path count {n} is below the minimum {MIN_PATHS}"));
            }
        }
        if self.calibration.time_pillars < 2 || self.calibration.state_pillars < 2 {
            return Err("the surface needs at least two time and two state pillars".into());
        }
        Ok(())
    }

    pub fn surface_path(&self) -> PathBuf {
        self.inputs
            .surface
            .clone()
            .unwrap_or_else(|| self.output.dir.join("surface.json"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
