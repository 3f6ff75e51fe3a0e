//! Incompressible ideal-fluid simulation on a periodic square grid with an
//! artificial obstacle-avoidance potential.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`); the `*64`
//! and `*32` aliases at the crate root name the usual instantiations.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod field_io;
pub mod grid;
pub mod identities;
pub mod image;
pub mod ops;
pub mod poisson;
pub mod potential;
pub mod run;
pub mod scalar;

pub use config::{parse_config, ConfigError, RunConfig};
pub use diagnostics::DiagnosticsRecord;
pub use dynamics::{
    step_impulse, step_velocity, DynamicsError, ProjectionMode, SimState, StepConfig, TimeScheme,
};
pub use field_io::{read_field, write_field, Field, FormatError};
pub use grid::{wrap_index, GridError, GridSpec, ScalarField, TensorField, VectorField};
pub use poisson::{
    helmholtz_project, parity_class, poisson_solve, ParityClass, PoissonConfig, PoissonError,
    ProjectionResult, SolverMethod,
};
pub use potential::{ObstaclePotential, PotentialError};
pub use run::{run, RunError, RunSummary};
pub use scalar::Real;

pub type GridSpec64 = GridSpec<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type TensorField64 = TensorField<f64>;
pub type ObstaclePotential64 = ObstaclePotential<f64>;
pub type SimState64 = SimState<f64>;
pub type GridSpec32 = GridSpec<f32>;
pub type ScalarField32 = ScalarField<f32>;
pub type VectorField32 = VectorField<f32>;
pub type TensorField32 = TensorField<f32>;
