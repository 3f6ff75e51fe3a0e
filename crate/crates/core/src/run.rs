//! Simulation driver: runs a [`RunConfig`] and writes its artifacts.
//!
//! Output directory layout:
//!
//! ```text
//! velocity_00000.iflow ...   snapshots at step 0 and every `snapshot_every` steps
//! diagnostics.jsonl          one DiagnosticsRecord per step
//! final_projected.iflow      velocity after the final projection
//! final_projected.csv        same, when the csv format is requested
//! divergence_t0.pgm/.json    divergence image of the initial field and its range
//! divergence_final.pgm/.json divergence image of the final projected field
//! summary.json               config echo, final diagnostics, wall time
//! error.json                 only when the run fails
//! ```

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, OutputFormat, Preset, RunConfig};
use crate::diagnostics::{
    annulus_energy_density, area_preservation_error, cost_step, divergence_norms, kinetic_energy,
    relative_l2, DiagnosticsError, DiagnosticsRecord,
};
use crate::dynamics::{
    costate_impulse_gap, step_impulse, step_velocity, tracer_lattice, DynamicsError,
    ProjectionMode, SimState,
};
use crate::field_io::{read_vector, vector_to_csv, write_vector, FormatError};
use crate::grid::{demo_initial_velocity, taylor_green_velocity, GridError, VectorField};
use crate::image::write_divergence_image;
use crate::poisson::{helmholtz_project, PoissonError};
use crate::potential::ObstaclePotential;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Annulus around the obstacle, in units of its radius.
pub const ANNULUS_INNER: f64 = 1.0;
pub const ANNULUS_OUTER: f64 = 3.0;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial condition: {0}")]
    InitialCondition(String),
    #[error("step {step}: {source}")]
    Dynamics {
        step: usize,
        #[source]
        source: DynamicsError,
    },
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::InitialCondition(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::InitialCondition(_) => "initial-condition",
            RunError::Dynamics { source, .. } => match source {
                DynamicsError::Projection(PoissonError::NonConvergence { .. }) => "non-convergence",
                DynamicsError::Diverged { .. } => "diverged-state",
                _ => "dynamics",
            },
            RunError::Diagnostics(_) => "diagnostics",
            RunError::Format(_) => "format",
            RunError::Io(_) => "io",
        }
    }

    pub fn report(&self) -> ErrorReport {
        let (step, t) = match self {
            RunError::Dynamics {
                step,
                source: DynamicsError::Diverged { t, .. },
            } => (Some(*step), Some(*t)),
            RunError::Dynamics { step, .. } => (Some(*step), None),
            _ => (None, None),
        };
        ErrorReport {
            error: self.kind().to_string(),
            message: self.to_string(),
            exit_code: self.exit_code(),
            step,
            t,
        }
    }
}

impl From<GridError> for RunError {
    fn from(e: GridError) -> Self {
        RunError::InitialCondition(e.to_string())
    }
}

/// Contents of `error.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusEnergy {
    pub r_in: f64,
    pub r_out: f64,
    pub initial: f64,
    #[serde(rename = "final")]
    pub last: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: serde_json::Value,
    pub steps_completed: usize,
    /// Diagnostics of the final projected field.
    pub final_diagnostics: DiagnosticsRecord,
    /// Poisson residual of the at-end projection.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_projection_residual: Option<f64>,
    pub annulus_energy: AnnulusEnergy,
    pub wall_time_s: f64,
}

pub fn snapshot_name(step: usize) -> String {
    format!("velocity_{step:05}.iflow")
}

fn initial_velocity(cfg: &RunConfig) -> Result<VectorField<f64>, RunError> {
    let spec = cfg.grid_spec()?;
    match cfg.initial_condition.preset {
        Preset::Paper => Ok(demo_initial_velocity(spec)),
        Preset::TaylorGreen => Ok(taylor_green_velocity(spec)),
        Preset::File => {
            let path = cfg
                .initial_condition
                .path
                .as_ref()
                .ok_or_else(|| RunError::InitialCondition("no path given".into()))?;
            let v = read_vector::<f64>(path)
                .map_err(|e| RunError::InitialCondition(format!("{}: {e}", path.display())))?;
            if *v.spec() != spec {
                return Err(RunError::InitialCondition(format!(
                    "{} is on a {} grid of length {}, config asks for {} and {}",
                    path.display(),
                    v.spec().n(),
                    v.spec().length(),
                    spec.n(),
                    spec.length()
                )));
            }
            if !v.is_finite() {
                return Err(RunError::InitialCondition(format!(
                    "{} has non-finite values",
                    path.display()
                )));
            }
            Ok(v)
        }
    }
}

struct Monitor<'a> {
    cfg: &'a RunConfig,
    potential: Option<ObstaclePotential<f64>>,
    reference_lattice: Vec<[f64; 2]>,
    cost: f64,
}

impl Monitor<'_> {
    fn record(
        &self,
        step: usize,
        state: &SimState<f64>,
        shadow: Option<&SimState<f64>>,
    ) -> Result<DiagnosticsRecord, RunError> {
        let v = &state.velocity;
        let (divergence_max, divergence_l2) = divergence_norms(v);
        let area_error_max = if self.cfg.tracers.enabled {
            Some(area_preservation_error(
                &self.reference_lattice,
                &state.tracers,
                self.cfg.tracers.lattice_m,
                self.cfg.grid.length,
            )?)
        } else {
            None
        };
        let impulse_velocity_rel_l2 = shadow
            .filter(|_| self.cfg.impulse_crosscheck.enabled)
            .map(|s| relative_l2(&s.velocity, v));
        let costate_impulse_gap = shadow.and_then(|s| {
            let z = s.impulse.as_ref()?;
            s.costates
                .as_ref()
                .map(|c| costate_impulse_gap(c, &s.tracers, z))
        });
        Ok(DiagnosticsRecord {
            step,
            t: state.t,
            kinetic_energy: kinetic_energy(v),
            divergence_max,
            divergence_l2,
            cost_accumulator: self.cost,
            area_error_max,
            max_speed: v.max_speed(),
            impulse_velocity_rel_l2,
            costate_impulse_gap,
        })
    }

    fn accumulate(&mut self, state: &SimState<f64>) -> Result<(), RunError> {
        let dt = self.cfg.time.dt;
        self.cost += if state.tracers.is_empty() {
            dt * kinetic_energy(&state.velocity)
        } else {
            cost_step(&state.velocity, &state.tracers, self.potential.as_ref(), dt)?
        };
        Ok(())
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::from)?;
    fs::write(path, text + "\n")
}

/// Runs `cfg`, writing into `cfg.output.directory`.
///
/// On failure `error.json` is written (when the directory exists) before the
/// error is returned.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let out = cfg.output.directory.clone();
    let result = run_inner(cfg, &out);
    if let Err(e) = &result {
        if out.is_dir() {
            let _ = write_json(&out.join("error.json"), &e.report());
        }
    }
    result
}

fn run_inner(cfg: &RunConfig, out: &Path) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    cfg.validate()?;
    let spec = cfg.grid_spec()?;
    let step_cfg = cfg.step_config(&spec);
    let potential = cfg.obstacle();
    fs::create_dir_all(out)?;
    let stale = out.join("error.json");
    if stale.exists() {
        fs::remove_file(stale)?;
    }
    let path = |name: &str| -> PathBuf { out.join(name) };
    let fields = cfg.output.wants(OutputFormat::Iflow);
    let images = cfg.output.wants(OutputFormat::Pgm);

    let mut v0 = initial_velocity(cfg)?;
    if cfg.projection.project_initial {
        v0 = helmholtz_project(&v0, &step_cfg.poisson)
            .map_err(|e| RunError::Dynamics {
                step: 0,
                source: e.into(),
            })?
            .projected;
    }

    let m = cfg.tracers.lattice_m;
    let mut state = SimState::new(v0.clone());
    if cfg.tracers.enabled {
        state = state.with_tracer_lattice(m);
    }
    let mut shadow = (cfg.impulse_crosscheck.enabled || cfg.costates.enabled).then(|| {
        let mut s = SimState::new(v0.clone()).with_impulse();
        if cfg.costates.enabled {
            s = s.with_tracer_lattice(m).with_costates();
        }
        s
    });

    let mut monitor = Monitor {
        cfg,
        potential,
        reference_lattice: if cfg.tracers.enabled {
            tracer_lattice(&spec, m)
        } else {
            Vec::new()
        },
        cost: 0.0,
    };
    let annulus = |v: &VectorField<f64>| {
        let p = &cfg.potential;
        annulus_energy_density(v, [p.a, p.b], ANNULUS_INNER * p.r, ANNULUS_OUTER * p.r)
    };
    let annulus_initial = annulus(&v0);

    if images {
        write_divergence_image(&v0, &path("divergence_t0.pgm"))?;
    }
    let mut log = BufWriter::new(fs::File::create(path("diagnostics.jsonl"))?);
    let emit = |log: &mut BufWriter<fs::File>, rec: &DiagnosticsRecord| -> io::Result<()> {
        serde_json::to_writer(&mut *log, rec).map_err(io::Error::from)?;
        log.write_all(b"\n")?;
        log.flush()
    };

    let first = monitor.record(0, &state, shadow.as_ref())?;
    emit(&mut log, &first)?;
    if fields {
        write_vector(&state.velocity, &path(&snapshot_name(0)))?;
    }

    for step in 1..=cfg.time.steps {
        monitor.accumulate(&state)?;
        let fail = |source| RunError::Dynamics { step, source };
        state = step_velocity(&state, &step_cfg, potential.as_ref()).map_err(fail)?;
        if let Some(s) = shadow.as_ref() {
            shadow = Some(step_impulse(s, &step_cfg, potential.as_ref()).map_err(fail)?);
        }
        let rec = monitor.record(step, &state, shadow.as_ref())?;
        emit(&mut log, &rec)?;
        if fields && step % cfg.output.snapshot_every == 0 {
            write_vector(&state.velocity, &path(&snapshot_name(step)))?;
        }
    }

    let steps = cfg.time.steps;
    let mut final_state = state.clone();
    let mut residual = None;
    if cfg.projection.mode == ProjectionMode::AtEnd {
        let proj = helmholtz_project(&state.velocity, &step_cfg.poisson).map_err(|e| {
            RunError::Dynamics {
                step: steps,
                source: e.into(),
            }
        })?;
        final_state.velocity = proj.projected;
        residual = Some(proj.residual);
    }
    let final_record = monitor.record(steps, &final_state, shadow.as_ref())?;
    if fields {
        write_vector(&final_state.velocity, &path("final_projected.iflow"))?;
    }
    if cfg.output.wants(OutputFormat::Csv) {
        fs::write(
            path("final_projected.csv"),
            vector_to_csv(&final_state.velocity),
        )?;
    }
    if images {
        write_divergence_image(&final_state.velocity, &path("divergence_final.pgm"))?;
    }

    let summary = RunSummary {
        config: cfg.to_json(),
        steps_completed: steps,
        final_diagnostics: final_record,
        final_projection_residual: residual,
        annulus_energy: AnnulusEnergy {
            r_in: ANNULUS_INNER * cfg.potential.r,
            r_out: ANNULUS_OUTER * cfg.potential.r,
            initial: annulus_initial,
            last: annulus(&final_state.velocity),
        },
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_json(&path("summary.json"), &summary)?;
    Ok(summary)
}
