//! `fringe`: synthesize fringe patterns, demodulate them with the augmented
//! Lagrangian or fixed-point solver, denoise images, and sweep noise levels.
//!
//! Exit codes: 0 success, 2 usage error, 3 input error, 4 solver did not
//! converge (results are still written), 1 any other failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fringe_core::config::Sweep;
use fringe_core::FringeError;

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "fringe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic fringe pattern and its ground truth
    Synth(SynthArgs),
    /// Recover phase, modulation and background from a pattern
    Demod(DemodArgs),
    /// TV-denoise a grayscale image
    Denoise(DenoiseArgs),
    /// Run both solvers over a list of noise levels
    Sweep(SweepArgs),
    /// Print the normalized error between two phase fields
    Compare(CompareArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Alm,
    Fp,
}

impl MethodArg {
    pub fn name(&self) -> &'static str {
        match self {
            MethodArg::Alm => "alm",
            MethodArg::Fp => "fp",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum UpdateOrder {
    GaussSeidel,
    Jacobi,
}

impl From<UpdateOrder> for Sweep {
    fn from(o: UpdateOrder) -> Self {
        match o {
            UpdateOrder::GaussSeidel => Sweep::GaussSeidel,
            UpdateOrder::Jacobi => Sweep::Jacobi,
        }
    }
}

/// Shape of the synthetic surface; defaults are the benchmark pattern.
#[derive(Args, Debug, Clone)]
pub struct SurfaceArgs {
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    #[arg(long, default_value_t = 480)]
    pub height: usize,
    /// Carrier frequency, radians per pixel along x
    #[arg(long, default_value_t = 0.7)]
    pub carrier_fx: f64,
    /// Scale of the smooth phase surface, radians
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Phase jump inside the step rectangle, radians
    #[arg(long, default_value_t = 0.6)]
    pub step_height: f64,
    /// Background level at the image centre
    #[arg(long, default_value_t = 1.0)]
    pub background: f64,
    /// Background change across the image width
    #[arg(long, default_value_t = 0.5)]
    pub tilt: f64,
    /// Modulation at the image centre
    #[arg(long, default_value_t = 1.0)]
    pub modulation: f64,
    /// Radial modulation falloff, in [0, 2)
    #[arg(long, default_value_t = 1.2)]
    pub falloff: f64,
    /// Seed of the additive Gaussian noise
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Standard deviation of the additive noise
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[command(flatten)]
    pub surface: SurfaceArgs,
}

/// Solver parameters shared by `demod` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 11.5)]
    pub r: f64,
    /// TV smoothing of the fixed-point solver
    #[arg(long, default_value_t = 1e-3)]
    pub beta: f64,
    /// Relative-change stopping threshold
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = UpdateOrder::GaussSeidel)]
    pub update_order: UpdateOrder,
    /// Relative residual target of the inner conjugate gradient solves
    #[arg(long, default_value_t = 1e-6)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub inner_max_iter: usize,
    /// Fill the wall_ms column of report.csv (makes it run-dependent)
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Args, Debug)]
pub struct DemodArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Fringe pattern, F64F
    #[arg(long)]
    pub pattern: PathBuf,
    /// Carrier phase, F64F
    #[arg(long)]
    pub carrier: PathBuf,
    /// Ground-truth phase, F64F; enables the q_err column
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    /// Noisy image, binary PGM
    #[arg(long)]
    pub image: PathBuf,
    /// Clean reference image, binary PGM; enables the q_err column
    #[arg(long)]
    pub clean: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 11.5)]
    pub r: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub inner_max_iter: usize,
    #[arg(long)]
    pub record_timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2")]
    pub sigmas: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "alm,fp")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 6.0)]
    pub lambda: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Worker threads for running cells; 0 uses all cores
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    NotConverged,
}

fn exit_code(err: &FringeError) -> u8 {
    match err {
        FringeError::Solve { .. } | FringeError::NonFinite { .. } => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::synth(&args),
        Command::Demod(args) => commands::demod(&args),
        Command::Denoise(args) => commands::denoise(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Compare(args) => commands::compare(&args),
    };
    match result {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: solver stopped at the iteration limit before converging");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
