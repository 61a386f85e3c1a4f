use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hadamard_lab::spectral::BoundaryCondition;
use hadamard_lab_cli::{run, CliError, ExperimentConfig, FieldConfig, Format, Pipeline, THREADS_ENV};

#[derive(Parser)]
#[command(name = "hadamard-lab", version, about = "Hadamard variations and rigidity integrals of ellipses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues with symmetry class and cluster id.
    Eigs(Overrides),
    /// One billiard orbit with its caustic invariant.
    Billiards(Overrides),
    /// Periodic families of the ellipse up to q_max bounces.
    Lengths(Overrides),
    /// Hadamard formula against central finite differences.
    HadamardCheck(Overrides),
    /// Smoothed wave-trace variation over a T grid with length markers.
    TraceScan(Overrides),
    /// Moment-matrix null-space test and the field's curve residuals.
    Rigidity(Overrides),
    /// Abel transform, its derivative and Taylor moments at b.
    Abel(Overrides),
    /// First non-flat order and reparametrization of a Taylor sequence.
    Flatness(Overrides),
}

#[derive(Clone, Copy, ValueEnum)]
enum Bc {
    Dirichlet,
    Neumann,
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct Overrides {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    echo_config: bool,
    #[arg(long)]
    semi_major: Option<f64>,
    #[arg(long)]
    semi_minor: Option<f64>,
    /// Symmetric deformation coefficients of the domain.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    deformation: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    #[arg(long, value_enum)]
    bc: Option<Bc>,
    /// Symmetric coefficients of the normal velocity ρ̇.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    field: Option<Vec<f64>>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    q_max: Option<u32>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    #[arg(long)]
    t_steps: Option<usize>,
    #[arg(long)]
    tail_tol: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    zeta0: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    curves: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    refinement: Option<usize>,
    #[arg(long)]
    endpoint_constraints: Option<bool>,
    #[arg(long)]
    z_min: Option<f64>,
    #[arg(long)]
    z_max: Option<f64>,
    #[arg(long)]
    z_steps: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    stem: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

macro_rules! set {
    ($src:expr, $dst:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl Overrides {
    fn resolve(self, pipeline: Pipeline) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                ExperimentConfig::from_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        c.pipeline = pipeline;
        set!(self.semi_major, c.domain.semi_major);
        set!(self.semi_minor, c.domain.semi_minor);
        set!(self.deformation, c.domain.deformation);
        set!(self.amplitude, c.domain.amplitude);
        if let Some(bc) = self.bc {
            c.bc = match bc {
                Bc::Dirichlet => BoundaryCondition::Dirichlet,
                Bc::Neumann => BoundaryCondition::Neumann,
            };
        }
        if let Some(coefficients) = self.field {
            c.field = FieldConfig::Symmetric { coefficients };
        }
        set!(self.lambda_max, c.lambda_max);
        set!(self.grid, c.grid);
        set!(self.q_max, c.q_max);
        set!(self.sigma, c.sigma);
        set!(self.t_min, c.t_min);
        set!(self.t_max, c.t_max);
        set!(self.t_steps, c.t_steps);
        set!(self.tail_tol, c.tail_tol);
        set!(self.h, c.h);
        set!(self.clusters, c.clusters);
        set!(self.theta0, c.theta0);
        set!(self.zeta0, c.zeta0);
        set!(self.iterations, c.iterations);
        set!(self.modes, c.modes);
        set!(self.curves, c.curves);
        set!(self.samples, c.samples);
        set!(self.refinement, c.refinement);
        set!(self.endpoint_constraints, c.endpoint_constraints);
        set!(self.z_min, c.z_min);
        set!(self.z_max, c.z_max);
        set!(self.z_steps, c.z_steps);
        set!(self.k_max, c.k_max);
        set!(self.out_dir, c.output.dir);
        if self.stem.is_some() {
            c.output.stem = self.stem;
        }
        set!(self.format, c.output.format);
        Ok(c)
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{THREADS_ENV}: expected a thread count, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, overrides) = match cli.command {
        Command::Eigs(o) => (Pipeline::Eigs, o),
        Command::Billiards(o) => (Pipeline::Billiards, o),
        Command::Lengths(o) => (Pipeline::Lengths, o),
        Command::HadamardCheck(o) => (Pipeline::HadamardCheck, o),
        Command::TraceScan(o) => (Pipeline::TraceScan, o),
        Command::Rigidity(o) => (Pipeline::Rigidity, o),
        Command::Abel(o) => (Pipeline::Abel, o),
        Command::Flatness(o) => (Pipeline::Flatness, o),
    };
    let echo = overrides.echo_config;
    let result = configure_threads().and_then(|_| overrides.resolve(pipeline)).and_then(|config| {
        if echo {
            config.validate()?;
            print!("{}", config.to_toml());
            return Ok(None);
        }
        run(&config).map(Some)
    });
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(outcome)) => {
            println!("{}", outcome.path.display());
            if outcome.partial {
                eprintln!("hadamard-lab: some rows failed; see the status column in {}", outcome.path.display());
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("hadamard-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
