//! Scenario configuration (JSON) and the two built-in presets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::grid::{BoundaryConfig, GridSpec, InflowProfile, MacroState};
use crate::model::ModelParams;
use crate::snapshot::read_snapshot;
use crate::table::{MeshMeta, CLOG_RADIUS, DEFAULT_DELTA_R, DEFAULT_N_RHO, DEFAULT_N_THETA, DEFAULT_R_MIN};

/// Radius growth coefficient of the uniform preset; the deposit keeps
/// growing monotonically while inflow is active.
pub const UNIFORM_ALPHA_R: f64 = 0.1;
/// Radius growth coefficient of the bumps preset; strong enough for cells
/// at the inflow edge and on the bumps to clog by the final time.
pub const BUMPS_ALPHA_R: f64 = 1.0;

pub const DEFAULT_SNAPSHOT_TIMES: [f64; 5] = [0.5, 0.75, 1.5, 2.25, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Explicit,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MonitorPolicy {
    #[default]
    Warn,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeStep {
    /// `dt = ratio * dx^2`.
    Ratio { ratio: f64 },
    Fixed { dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub time_step: TimeStep,
    pub t_final: f64,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, ConfigError> {
        match self.time_step {
            TimeStep::Ratio { ratio } => GridSpec::with_ratio(self.points, ratio, self.t_final),
            TimeStep::Fixed { dt } => GridSpec::new(self.points, dt, self.t_final),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: [f64; 2],
    pub amplitude: f64,
    /// Coefficient `c` in `exp(-c |x - center|^2)`.
    pub sharpness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialField {
    Constant { value: f64 },
    /// `base + sum of Gaussian bumps`.
    Gaussians { base: f64, bumps: Vec<Bump> },
    /// Snapshot CSV with matching grid size.
    File { path: PathBuf },
}

impl InitialField {
    pub fn sample(&self, grid: &GridSpec) -> Result<Vec<f64>, ConfigError> {
        match self {
            InitialField::Constant { value } => Ok(vec![*value; grid.len()]),
            InitialField::Gaussians { base, bumps } => Ok((0..grid.len())
                .map(|p| {
                    let x = grid.coords(p);
                    base + bumps
                        .iter()
                        .map(|b| {
                            let d2 = (x[0] - b.center[0]).powi(2) + (x[1] - b.center[1]).powi(2);
                            b.amplitude * (-b.sharpness * d2).exp()
                        })
                        .sum::<f64>()
                })
                .collect()),
            InitialField::File { path } => {
                let snap = read_snapshot(path).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if snap.points != grid.points {
                    return Err(ConfigError::Invalid(format!(
                        "{} has {} points per side, grid has {}",
                        path.display(),
                        snap.points,
                        grid.points
                    )));
                }
                Ok(snap.values)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    pub u: Vec<InitialField>,
    pub v: InitialField,
    pub r: InitialField,
}

/// Partition and mesh resolution of the tortuosity table the scenario expects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSettings {
    pub r_min: f64,
    pub delta_r: f64,
    pub n_theta: usize,
    pub n_rho: usize,
}

impl Default for TableSettings {
    fn default() -> Self {
        TableSettings { r_min: DEFAULT_R_MIN, delta_r: DEFAULT_DELTA_R, n_theta: DEFAULT_N_THETA, n_rho: DEFAULT_N_RHO }
    }
}

impl TableSettings {
    pub fn mesh_meta(&self) -> MeshMeta {
        MeshMeta { n_theta: self.n_theta, n_rho: self.n_rho }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub snapshot_times: Vec<f64>,
    /// Also render every snapshot as SVG.
    #[serde(default = "yes")]
    pub svg: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings { tol: 1e-8, max_iter: 50 }
    }
}

/// Analysis-box overrides; unset entries are derived from the initial and
/// boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    #[serde(default)]
    pub policy: MonitorPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelParams,
    pub grid: GridConfig,
    pub boundary: BoundaryConfig,
    pub initial: InitialConditions,
    #[serde(default)]
    pub table: TableSettings,
    pub output: OutputConfig,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub picard: PicardSettings,
    #[serde(default)]
    pub monitor: MonitorConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.to_json() + "\n").map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        self.grid.spec()
    }

    /// Structural checks that do not need a table.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        let grid = self.grid_spec()?;
        let n = self.model.n_species();
        self.boundary.validate(&grid, n)?;
        if self.initial.u.len() != n {
            return Err(ConfigError::Invalid(format!("{} initial u fields for {n} species", self.initial.u.len())));
        }
        for &t in &self.output.snapshot_times {
            if !(t >= 0.0 && t <= grid.t_final) {
                return Err(ConfigError::Invalid(format!(
                    "snapshot time {t} outside [0, {}]",
                    grid.t_final
                )));
            }
        }
        if !(self.picard.tol > 0.0) || self.picard.max_iter == 0 {
            return Err(ConfigError::Invalid("picard tolerance and iteration cap must be positive".into()));
        }
        // Only check the sampled fields for closed-form initial data; files are
        // checked when the state is built.
        if !matches!(self.initial.r, InitialField::File { .. }) {
            self.initial_state()?;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<MacroState, ConfigError> {
        let grid = self.grid_spec()?;
        let mut u = Vec::with_capacity(self.initial.u.len());
        for (s, f) in self.initial.u.iter().enumerate() {
            let values = f.sample(&grid)?;
            check_nonnegative(&values, &format!("u{}", s + 1))?;
            u.push(values);
        }
        let v = self.initial.v.sample(&grid)?;
        check_nonnegative(&v, "v")?;
        let r = self.initial.r.sample(&grid)?;
        if let Some(bad) = r.iter().find(|x| !(**x > 0.0 && **x < CLOG_RADIUS)) {
            return Err(ConfigError::Invalid(format!("initial radius {bad} outside (0, 1/2)")));
        }
        let clogged = vec![false; grid.len()];
        Ok(MacroState { t: 0.0, u, v, r, clogged })
    }
}

fn check_nonnegative(values: &[f64], name: &str) -> Result<(), ConfigError> {
    match values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        Some(bad) => Err(ConfigError::Invalid(format!("initial {name} has value {bad}"))),
        None => Ok(()),
    }
}

fn preset_model() -> ModelParams {
    let a = vec![0.9, 0.5, 0.3];
    ModelParams {
        d: vec![0.3, 0.5, 0.99],
        alpha_v: a.clone(),
        a,
        beta: vec![1.0; 3],
        gamma: vec![vec![0.1 * 100.0; 3]; 3],
        alpha_r: UNIFORM_ALPHA_R,
        b_r: 0.5,
        t0: 2.0,
        domain_area: 1.0,
        kappa: Some(1.0),
    }
}

/// Three species entering through `x2 = 0` into a medium of equal deposits.
pub fn preset_uniform() -> ScenarioConfig {
    ScenarioConfig {
        name: "uniform".into(),
        model: preset_model(),
        grid: GridConfig { points: 41, time_step: TimeStep::Ratio { ratio: 0.2 }, t_final: 3.0 },
        boundary: BoundaryConfig {
            inflow: vec![
                InflowProfile::Parabolic { amplitude: 25.0, root: 1.0 },
                InflowProfile::Zero,
                InflowProfile::Zero,
            ],
        },
        initial: InitialConditions {
            u: vec![InitialField::Constant { value: 0.0 }; 3],
            v: InitialField::Constant { value: 0.0 },
            r: InitialField::Constant { value: 0.1 },
        },
        table: TableSettings::default(),
        output: OutputConfig { snapshot_times: DEFAULT_SNAPSHOT_TIMES.to_vec(), svg: true },
        scheme: Scheme::Explicit,
        picard: PicardSettings::default(),
        monitor: MonitorConfig::default(),
    }
}

/// As [`preset_uniform`] with two deposit bumps at (0.2, 0.2) and (0.8, 0.8).
pub fn preset_bumps() -> ScenarioConfig {
    let mut cfg = preset_uniform();
    cfg.name = "bumps".into();
    // 0.24 keeps the step inside the explicit stability limit.
    cfg.grid.time_step = TimeStep::Ratio { ratio: 0.24 };
    cfg.model.alpha_r = BUMPS_ALPHA_R;
    let bump = |c: [f64; 2]| Bump { center: c, amplitude: 0.35, sharpness: 60.0 };
    cfg.initial.r = InitialField::Gaussians { base: 0.05, bumps: vec![bump([0.2, 0.2]), bump([0.8, 0.8])] };
    cfg
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "uniform" => Some(preset_uniform()),
        "bumps" => Some(preset_bumps()),
        _ => None,
    }
}
