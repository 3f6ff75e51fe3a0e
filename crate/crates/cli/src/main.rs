use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use iflow_core::config::{parse_config, RunConfig};
use iflow_core::dynamics::ProjectionMode;
use iflow_core::field_io::{read_vector, vector_to_csv, write_vector};
use iflow_core::identities::{check_identities, IdentityItem};
use iflow_core::ops::divergence;
use iflow_core::poisson::{helmholtz_project, PoissonConfig, PoissonError, SolverMethod};
use iflow_core::run::{run, RunError, EXIT_NUMERICAL, EXIT_USAGE};

const OUT_DIR_ENV: &str = "IFLOW_OUT_DIR";
const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "iflow",
    version,
    about = "Ideal-fluid flows with an obstacle-avoidance potential"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a JSON config file.
    Run { config: PathBuf },
    /// Remove the divergence from a vector field file.
    Project {
        field: PathBuf,
        /// Output path (default: `<input stem>.projected.iflow` next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV copy of the projected field.
        #[arg(long)]
        csv: bool,
        #[arg(long, value_enum, default_value_t = Method::Cg)]
        method: Method,
    },
    /// Check the vector-calculus identities on random analytic fields.
    CheckIdentities {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The 30×30, 140-step obstacle run with projection at the end.
    DemoPaper {
        /// Output directory (default: $IFLOW_OUT_DIR, else `demo-paper-out`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Projection::AtEnd)]
        projection: Projection,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Cg,
    Spectral,
}

#[derive(Clone, Copy, ValueEnum)]
enum Projection {
    AtEnd,
    PerStep,
}

fn print_json(value: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("json"));
}

fn fail(code: i32, kind: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!(
        "{}",
        json!({ "error": kind, "message": message.to_string(), "exit_code": code })
    );
    ExitCode::from(code as u8)
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)
}

fn execute(cfg: RunConfig) -> ExitCode {
    match run(&cfg) {
        Ok(summary) => {
            print_json(&json!({
                "output": cfg.output.directory,
                "steps_completed": summary.steps_completed,
                "final": summary.final_diagnostics,
                "annulus_energy": summary.annulus_energy,
                "wall_time_s": summary.wall_time_s,
            }));
            ExitCode::SUCCESS
        }
        Err(e) => report_run_error(&e),
    }
}

fn report_run_error(e: &RunError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&e.report()).expect("json"));
    ExitCode::from(e.exit_code() as u8)
}

fn cmd_run(path: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, "config", format!("{}: {e}", path.display())),
    };
    match parse_config(&text) {
        Ok(mut cfg) => {
            if let Some(dir) = env_out_dir() {
                cfg.output.directory = dir;
            }
            execute(cfg)
        }
        Err(e) => fail(EXIT_USAGE, "config", e),
    }
}

fn cmd_project(field: &Path, out: Option<PathBuf>, csv: bool, method: Method) -> ExitCode {
    let v = match read_vector::<f64>(field) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_USAGE, "format", format!("{}: {e}", field.display())),
    };
    let method = match method {
        Method::Cg => SolverMethod::ConjugateGradient,
        Method::Spectral => SolverMethod::Spectral,
    };
    let pc = PoissonConfig::for_grid(v.spec()).with_method(method);
    let proj = match helmholtz_project(&v, &pc) {
        Ok(p) => p,
        Err(e @ PoissonError::NonConvergence { .. }) => {
            return fail(EXIT_NUMERICAL, "non-convergence", e)
        }
        Err(e) => return fail(EXIT_USAGE, "config", e),
    };
    let out = out.unwrap_or_else(|| {
        let stem = field.file_stem().unwrap_or_default().to_string_lossy();
        field.with_file_name(format!("{stem}.projected.iflow"))
    });
    if let Err(e) = write_vector(&proj.projected, &out) {
        return fail(EXIT_NUMERICAL, "io", e);
    }
    let csv_path = csv.then(|| out.with_extension("csv"));
    if let Some(p) = &csv_path {
        if let Err(e) = fs::write(p, vector_to_csv(&proj.projected)) {
            return fail(EXIT_NUMERICAL, "io", e);
        }
    }
    print_json(&json!({
        "output": out,
        "csv": csv_path,
        "input_divergence_max": divergence(&v).max_abs(),
        "output_divergence_max": divergence(&proj.projected).max_abs(),
        "output_max_abs": proj.projected.max_abs(),
        "residual": proj.residual,
        "iterations": proj.iterations,
    }));
    ExitCode::SUCCESS
}

fn cmd_check_identities(trials: usize, seed: u64) -> ExitCode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = check_identities::<f64, _>(trials, &mut rng);
    let items: Vec<_> = IdentityItem::ALL
        .iter()
        .map(|&item| {
            let r = report.max_residual[item.number() - 1];
            json!({ "item": item.number(), "max_residual": r, "pass": r <= IDENTITY_TOLERANCE })
        })
        .collect();
    let ok = report.passes(IDENTITY_TOLERANCE);
    print_json(&json!({
        "trials": report.trials,
        "seed": seed,
        "tolerance": IDENTITY_TOLERANCE,
        "items": items,
        "pass": ok,
    }));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL as u8)
    }
}

fn cmd_demo_paper(out: Option<PathBuf>, projection: Projection) -> ExitCode {
    let mut cfg = RunConfig::demo();
    cfg.projection.mode = match projection {
        Projection::AtEnd => ProjectionMode::AtEnd,
        Projection::PerStep => ProjectionMode::PerStep,
    };
    cfg.output.directory = out
        .or_else(env_out_dir)
        .unwrap_or_else(|| PathBuf::from("demo-paper-out"));
    execute(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Project {
            field,
            out,
            csv,
            method,
        } => cmd_project(&field, out, csv, method),
        Command::CheckIdentities { trials, seed } => cmd_check_identities(trials, seed),
        Command::DemoPaper { out, projection } => cmd_demo_paper(out, projection),
    }
}
