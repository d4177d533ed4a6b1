//! Command-line front end of `carnot-calc`.
//!
//! [`run`] parses the arguments, merges a flat JSON config under them, executes one verb and
//! writes its report. Exit codes: 0 when every check in the report passes, 1 when one fails or a
//! computation breaks down, 2 on usage errors (bad flags, unknown ids, malformed config, unmet
//! preconditions such as a non-minimal surface for the stability scan).

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use carnot_calc::CalcError;

pub mod config;
pub mod report;
mod verbs;

pub use report::{emit_report, Format, ReportRow, Table};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CARNOT_CALC_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation; exit code 2.
    Usage(String),
    /// The computation could not be carried out; exit code 1.
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CalcError> for CliError {
    fn from(e: CalcError) -> Self {
        match e {
            CalcError::InvalidArgument(_)
            | CalcError::InvalidGroup(_)
            | CalcError::IndexOutOfRange(_)
            | CalcError::Parse(_)
            | CalcError::Unsupported(_)
            | CalcError::Support(_)
            | CalcError::NotMinimal { .. } => CliError::Usage(e.to_string()),
            CalcError::CharacteristicPoint { .. } | CalcError::DegenerateSurface(_) | CalcError::NumericFailure(_) => {
                CliError::Failure(e.to_string())
            }
        }
    }
}

const EXIT_HELP: &str = "\
Exit codes: 0 all checks pass, 1 a check fails or a computation breaks down, 2 usage error.
Every flag may also be given in a flat JSON file passed with --config, keyed by the long flag
name (e.g. {\"surface\": \"xyt-graph\", \"grid\": 64}); flags on the command line take precedence.
CARNOT_CALC_THREADS=<n> caps the number of worker threads; reports do not depend on it.";

#[derive(Debug, Parser)]
#[command(name = "carnot-calc", version, about = "Sub-Riemannian calculus of hypersurfaces in the Heisenberg group", after_help = EXIT_HELP)]
pub struct Cli {
    /// Flat JSON file with values for any of the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report to this file instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Report format (each verb has its own default)
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Frame and mean curvature at sample points, by the patch and level-set routes
    #[command(after_help = "CSV columns: u,v,p,q,omega,W,H_param,H_levelset,A,obar,pass\n\
        pass: |H_param - H_levelset| <= 1e-5, and |H| <= 1e-6 on surfaces known to be H-minimal.")]
    Curvature(CurvatureArgs),
    /// H-perimeter or eps-regularised area of a patch
    #[command(after_help = "JSON: {value, error_estimate, excluded_mass, grid}; CSV has the same columns.")]
    Measure(MeasureArgs),
    /// Residuals of the frame identity battery
    #[command(after_help = "CSV columns: identity_id,surface_id,grid,residual,pass\n\
        identity_id is <route>/<identity>: route ambient (level set) or patch; pass: residual <= 1e-4.")]
    Identities(IdentitiesArgs),
    /// First and second variation of the H-perimeter along a deformation
    #[command(after_help = "Field specs: normal:cu,cv,ru,rv | tangential:cu,cv,ru,rv | bump:cu,cv,ru,rv:a,b,k\n\
        (a bump with the given centre and radii in the parameters; normal gives normal component F = bump).\n\
        Modes: v1, v2-full, v2-geom, numeric:1, numeric:2, all (every route plus cross-checks).\n\
        CSV columns: route,value,pass")]
    Variation(VariationArgs),
    /// Stability form of an H-minimal surface over a family of bumps
    #[command(after_help = "Families: bump-lattice (5 x 5 x 5 centres and radii).\n\
        CSV columns: index,cu,cv,ru,rv,value")]
    Stability(StabilityArgs),
    /// Mean-curvature-flow identity residual at sample points
    #[command(name = "flow-check", after_help = "CSV columns: u,v,residual,pass (pass: residual <= 1e-4)")]
    FlowCheck(FlowArgs),
    /// List the catalog of surfaces, deformation fields and families
    #[command(after_help = "CSV columns: kind,id,description")]
    Catalog,
}

#[derive(Debug, Clone, Args)]
pub struct SurfaceArgs {
    /// Catalog id (see `catalog`), or patch:<file.json> for a user patch
    #[arg(long)]
    pub surface: Option<String>,
    /// Parameter rectangle u0,u1,v0,v1 overriding the catalog default
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Number of sample points
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Simpson cells per direction (even, at least 8)
    #[arg(long)]
    pub grid: Option<usize>,
    /// Regularisation parameter; 0 gives the H-perimeter
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct IdentitiesArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Sampling lattice size per direction
    #[arg(long)]
    pub grid: Option<usize>,
    /// Number of sample points
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VariationArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Deformation field spec
    #[arg(long)]
    pub field: Option<String>,
    /// Route to evaluate
    #[arg(long)]
    pub mode: Option<String>,
    /// Simpson cells per direction
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Candidate family
    #[arg(long)]
    pub family: Option<String>,
    /// Simpson cells per direction
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// Number of sample points
    #[arg(long)]
    pub points: Option<usize>,
}

/// Parses `argv` (including the program name), runs the verb and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("carnot-calc: {e}");
            e.code()
        }
    }
}

/// Runs a parsed command line; `Ok(pass)` once the report is written.
pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => return Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(_) => None,
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Failure(format!("cannot start worker threads: {e}")))?
            .install(|| verbs::dispatch(cli)),
        None => verbs::dispatch(cli),
    }
}
