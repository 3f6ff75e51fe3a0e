//! JSON run configuration.
//!
//! Every key is optional; missing keys take the values of the obstacle demo preset.
//! Unknown keys are rejected at any depth.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ProjectionMode, StepConfig, TimeScheme};
use crate::grid::GridSpec;
use crate::poisson::{PoissonConfig, SolverMethod};
use crate::potential::ObstaclePotential;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value at {path}: {message}")]
    Validation { path: String, message: String },
}

impl ConfigError {
    fn invalid(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            path: path.to_string(),
            message: message.into(),
        }
    }

    /// Key path of a validation error.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { path, .. } => Some(path),
            ConfigError::Parse { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub time: TimeSection,
    pub projection: ProjectionSection,
    pub potential: PotentialSection,
    pub initial_condition: InitialConditionSection,
    pub tracers: TracerSection,
    pub costates: ToggleSection,
    pub impulse_crosscheck: ToggleSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 30,
            length: 4.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub steps: usize,
    pub scheme: TimeScheme,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt: 1.5e-3,
            steps: 140,
            scheme: TimeScheme::ForwardEuler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    pub mode: ProjectionMode,
    pub tolerance: f64,
    /// `None` means `20 n²`.
    pub max_iterations: Option<usize>,
    pub method: SolverMethod,
    pub project_initial: bool,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        Self {
            mode: ProjectionMode::PerStep,
            tolerance: 1e-10,
            max_iterations: None,
            method: SolverMethod::ConjugateGradient,
            project_initial: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub enabled: bool,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub tau: f64,
    pub epsilon: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            enabled: true,
            a: 7.0,
            b: 7.0,
            r: 0.5,
            tau: 1.0,
            epsilon: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[default]
    Paper,
    TaylorGreen,
    File,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditionSection {
    pub preset: Preset,
    /// Velocity field file, required when `preset` is `file`.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TracerSection {
    pub enabled: bool,
    pub lattice_m: usize,
}

impl Default for TracerSection {
    fn default() -> Self {
        Self {
            enabled: true,
            lattice_m: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToggleSection {
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// Binary field snapshots.
    Iflow,
    /// Divergence images.
    Pgm,
    /// CSV copy of the final projected field.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub snapshot_every: usize,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("iflow-out"),
            snapshot_every: 10,
            formats: vec![OutputFormat::Iflow, OutputFormat::Pgm],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Validation {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive_finite(path: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            path,
            format!("must be positive and finite, got {x}"),
        ))
    }
}

impl RunConfig {
    /// The obstacle demo: every default.
    pub fn demo() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive_finite("grid.length", self.grid.length)?;
        self.grid_spec()
            .map_err(|e| ConfigError::invalid("grid.n", e.to_string()))?;
        positive_finite("time.dt", self.time.dt)?;
        positive_finite("projection.tolerance", self.projection.tolerance)?;
        if self.projection.max_iterations == Some(0) {
            return Err(ConfigError::invalid(
                "projection.max_iterations",
                "must be at least 1",
            ));
        }
        let p = &self.potential;
        for (path, x) in [("potential.a", p.a), ("potential.b", p.b)] {
            if !x.is_finite() {
                return Err(ConfigError::invalid(path, "must be finite"));
            }
        }
        positive_finite("potential.r", p.r)?;
        if !(p.tau >= 0.0 && p.tau.is_finite()) {
            return Err(ConfigError::invalid(
                "potential.tau",
                format!("must be non-negative, got {}", p.tau),
            ));
        }
        positive_finite("potential.epsilon", p.epsilon)?;
        match (self.initial_condition.preset, &self.initial_condition.path) {
            (Preset::File, None) => {
                return Err(ConfigError::invalid(
                    "initial_condition.path",
                    "required for the file preset",
                ))
            }
            (Preset::File, Some(path)) if !path.is_file() => {
                return Err(ConfigError::invalid(
                    "initial_condition.path",
                    format!("{} does not exist", path.display()),
                ))
            }
            (Preset::Paper | Preset::TaylorGreen, Some(_)) => {
                return Err(ConfigError::invalid(
                    "initial_condition.path",
                    "only allowed with the file preset",
                ))
            }
            _ => {}
        }
        if self.tracers.enabled && self.tracers.lattice_m < 2 {
            return Err(ConfigError::invalid(
                "tracers.lattice_m",
                "must be at least 2",
            ));
        }
        if self.costates.enabled && !self.tracers.enabled {
            return Err(ConfigError::invalid(
                "costates.enabled",
                "costates need tracers.enabled",
            ));
        }
        if self.output.snapshot_every == 0 {
            return Err(ConfigError::invalid(
                "output.snapshot_every",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec<f64>, crate::grid::GridError> {
        GridSpec::new(self.grid.n, self.grid.length)
    }

    pub fn poisson(&self, spec: &GridSpec<f64>) -> PoissonConfig<f64> {
        let mut pc = PoissonConfig::for_grid(spec)
            .with_method(self.projection.method)
            .with_tolerance(self.projection.tolerance);
        if let Some(m) = self.projection.max_iterations {
            pc.max_iterations = m;
        }
        pc
    }

    pub fn step_config(&self, spec: &GridSpec<f64>) -> StepConfig<f64> {
        let mut sc = StepConfig::for_grid(spec)
            .with_dt(self.time.dt)
            .with_projection(self.projection.mode)
            .with_scheme(self.time.scheme);
        sc.poisson = self.poisson(spec);
        sc
    }

    /// The obstacle, or `None` when the potential is disabled.
    pub fn obstacle(&self) -> Option<ObstaclePotential<f64>> {
        let p = &self.potential;
        if !p.enabled {
            return None;
        }
        ObstaclePotential::new([p.a, p.b], p.r, p.tau, p.epsilon).ok()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
