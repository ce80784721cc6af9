use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use stabfem::driver::write_csv;
use stabfem::estimators::{write_indicators_csv, ErrorIndicators, PoissonIndicators};
use stabfem::mesh::write_mesh;
use stabfem::{adaptive_loop_with, emit_csv, EstimatorKind, Formulation, MaterialInput, Mesh, ProblemId, RefinementMode, RunConfig};

/// Adaptive stabilised P1-P0 mixed FEM for nearly incompressible plane elasticity.
#[derive(Debug, Parser)]
#[command(name = "stabfem", version)]
struct Cli {
    /// Test problem: 1, 2, 3 or patch
    #[arg(long)]
    problem: ProblemId,

    #[arg(long, default_value = "herrmann")]
    formulation: Formulation,

    #[arg(long, default_value = "poisson")]
    estimator: EstimatorKind,

    #[arg(long, default_value = "adaptive")]
    refinement: RefinementMode,

    /// Poisson ratio (defaults to the problem's reference value)
    #[arg(long)]
    nu: Option<f64>,

    /// Shear modulus
    #[arg(long, conflicts_with = "young")]
    mu: Option<f64>,

    /// Young's modulus
    #[arg(long = "E", id = "young")]
    young: Option<f64>,

    /// Bulk marking fraction
    #[arg(long, default_value_t = 0.5)]
    theta: f64,

    #[arg(long, default_value_t = 100_000)]
    max_dof: usize,

    /// Uniform refinements of the base mesh beyond the first
    #[arg(long, default_value_t = 3)]
    initial_level: usize,

    /// Convergence table CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write the final mesh
    #[arg(long)]
    dump_mesh: Option<PathBuf>,

    /// Write the final per-triangle indicators as CSV
    #[arg(long)]
    dump_indicators: Option<PathBuf>,

    /// Log progress per level
    #[arg(short, long)]
    verbose: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

impl Cli {
    fn config(&self) -> stabfem::Result<RunConfig> {
        let nu_or_default = |nu: Option<f64>| {
            nu.ok_or_else(|| stabfem::Error::InvalidArgument("--nu is required with --mu or --E".into()))
        };
        let material = match (self.mu, self.young) {
            (Some(mu), _) => MaterialInput::Shear { mu, nu: nu_or_default(self.nu)? },
            (_, Some(young)) => MaterialInput::Young { young, nu: nu_or_default(self.nu)? },
            _ => MaterialInput::Reference { nu: self.nu },
        };
        let config = RunConfig {
            problem: self.problem,
            formulation: self.formulation,
            estimator: self.estimator,
            refinement: self.refinement,
            theta: self.theta,
            material,
            max_dof: self.max_dof,
            initial_level: self.initial_level,
        };
        config.validate()?;
        Ok(config)
    }
}

fn exit_code(e: &stabfem::Error) -> u8 {
    match e.root() {
        stabfem::Error::InvalidArgument(_) | stabfem::Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn run(cli: &Cli) -> stabfem::Result<()> {
    let config = cli.config()?;
    let mut last: Option<(Mesh, ErrorIndicators, PoissonIndicators)> = None;
    let keep = cli.dump_mesh.is_some() || cli.dump_indicators.is_some();
    let table = adaptive_loop_with(&config, |state| {
        if keep {
            last = Some((state.mesh.clone(), state.residual.clone(), state.poisson.clone()));
        }
        Ok(())
    })?;

    match &cli.out {
        Some(path) => emit_csv(&table, path)?,
        None => write_csv(&table, io::stdout().lock())?,
    }
    if let Some((mesh, residual, poisson)) = &last {
        if let Some(path) = &cli.dump_mesh {
            let mut w = BufWriter::new(File::create(path)?);
            write_mesh(mesh, &mut w)?;
            w.flush()?;
        }
        if let Some(path) = &cli.dump_indicators {
            let mut w = BufWriter::new(File::create(path)?);
            write_indicators_csv(&mut w, residual, Some(poisson))?;
            w.flush()?;
        }
    }
    if let Some(rate) = table.tail_rate {
        eprintln!("levels: {}, final dof: {}, tail rate: {rate:.3}", table.rows.len(), table.rows.last().map_or(0, |r| r.dof));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
