//! `hdt`: command-line front end for the hyperdimensional transform.
//!
//! Every command writes CSV files into `--out` and prints one `wrote <path>`
//! line per file. Failures print a single `error kind=<kind> message=<text>`
//! line to stderr and exit nonzero (2 for usage errors, 1 otherwise).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdt_core::classification::PrototypeVariant;
use hdt_core::experiments::DatasetKind;

#[derive(Debug, Parser)]
#[command(name = "hdt", version, about = "Hyperdimensional transform toolkit")]
pub struct Cli {
    /// TOML file with an [encoder] block (an experiment file for `experiment`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the encoder seed (the seed list for `experiment`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: the experiment's `out`, else hdt-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode the points of a CSV file.
    Encode(InputArgs),
    /// Solve the normalization function and tabulate n(x).
    Normalize(OptionalInput),
    /// Transform tabulated function values and evaluate the inverse.
    Transform(InputArgs),
    /// Empirical density of a sample.
    Density(InputArgs),
    /// Distance between the empirical transforms of two samples.
    Mmd(MmdArgs),
    /// Mixture coefficients of a sample in terms of component samples.
    Deconvolve(DeconvolveArgs),
    /// Metropolis-Hastings draws from the empirical density of a sample.
    Sample(SampleArgs),
    /// Empirical joint density of (x, y) pairs on a grid.
    Joint(JointArgs),
    /// Fit a regression model and tabulate its predictions.
    Regress(RegressArgs),
    /// Fit a binary classifier and report its predictions.
    Classify(ClassifyArgs),
    /// Run an experiment described by `--config`.
    Experiment,
    /// Write a synthetic dataset.
    Dataset(DatasetArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Sample CSV with header `x` or `x,y`.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptionalInput {
    /// Finite domain to normalize over (required for sequence encoders).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MmdArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub other: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeconvolveArgs {
    /// The mixed sample.
    #[arg(long)]
    pub input: PathBuf,
    /// One sample per component; repeat the flag.
    #[arg(long = "component", required = true)]
    pub components: Vec<PathBuf>,
    /// Report the raw least-squares solution instead of projecting it onto
    /// the simplex.
    #[arg(long)]
    pub no_project: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Sample whose empirical density is the target.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
}

#[derive(Debug, Args)]
pub struct JointArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Lower end of the y domain [default: smallest y minus three length scales].
    #[arg(long, allow_negative_numbers = true)]
    pub y_lo: Option<f64>,
    /// Upper end of the y domain [default: largest y plus three length scales].
    #[arg(long, allow_negative_numbers = true)]
    pub y_hi: Option<f64>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegressMode {
    Empirical,
    Generative,
    Ridge,
    Physics,
    Iterative,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[arg(long, value_enum)]
    pub mode: RegressMode,
    /// Training pairs, header `x,y`.
    #[arg(long)]
    pub input: PathBuf,
    /// Ridge penalty; chosen by leave-one-out over a ladder when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Linear operator coefficients a_0,a_1[,a_2] of the physics constraint.
    #[arg(long, value_delimiter = ',', default_value = "0,0,1", allow_hyphen_values = true)]
    pub operator: Vec<f64>,
    /// Right-hand side of the physics constraint.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rhs: f64,
    /// Weight of the physics rows.
    #[arg(long, default_value_t = 1e-2)]
    pub weight: f64,
    /// Collocation points (evenly spaced); defaults to 100.
    #[arg(long)]
    pub collocation: Option<usize>,
    /// Learning rate of the iterative fit.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20)]
    pub passes: usize,
    /// Label domain of the generative model.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub y_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub y_hi: f64,
    /// Credible level of the generative interval.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Evaluation points on the encoder's interval.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifyModel {
    ProtoNormEach,
    ProtoRaw,
    ProtoNormDiff,
    Iterative,
    EmpiricalF,
    EmpiricalP,
    ClosedForm,
}

impl ClassifyModel {
    pub fn prototype(self) -> Option<PrototypeVariant> {
        match self {
            Self::ProtoNormEach => Some(PrototypeVariant::NormEach),
            Self::ProtoRaw => Some(PrototypeVariant::RawDiff),
            Self::ProtoNormDiff => Some(PrototypeVariant::NormDiff),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_enum)]
    pub model: ClassifyModel,
    /// Training pairs with labels +1 and -1.
    #[arg(long)]
    pub input: PathBuf,
    /// Points to predict; defaults to the training inputs.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Use the sign of the model vector.
    #[arg(long)]
    pub bipolar: bool,
    /// λ' of the closed-form model.
    #[arg(long, default_value_t = 1e4)]
    pub lambda_prime: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20)]
    pub passes: usize,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(value_parser = parse_kind)]
    pub kind: DatasetKind,
    /// Number of points (per family for sequence-families).
    #[arg(long)]
    pub size: Option<usize>,
}

fn parse_kind(s: &str) -> Result<DatasetKind, String> {
    s.parse().map_err(|e: hdt_core::Error| e.to_string())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let flat = message.replace('\n', " ");
    eprintln!("error kind={kind} message={:?}", flat.trim());
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            return fail("usage", first.trim_start_matches("error: "), 2);
        }
    };
    match commands::run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
