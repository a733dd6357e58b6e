use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use entrosim::cli::{self, RunConfig, ENV_OUTPUT_DIR};
use entrosim::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_ABORT: u8 = 4;
const EXIT_PROPS: u8 = 5;

/// Stochastic master equation simulator and entropy-rate bound verifier
/// for continuously monitored open quantum systems.
#[derive(Parser)]
#[command(name = "entrosim", version, after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

const EXIT_HELP: &str = "Exit codes:
  0  success
  1  internal or I/O error
  2  config or validation error
  3  inequality violation (some margin_sigmas < -3)
  4  trajectory aborted (pre-sanitize negativity exceeded the threshold)
  5  property-suite check failed";

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a trajectory ensemble and verify the entropy-rate bound.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured trajectory count.
        #[arg(long)]
        trajectories: Option<usize>,
        /// Override the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep the algebraic property checks over random states/operators.
    Props {
        /// Dimensions to sweep, e.g. 2,3,4 (subset of 2..=5).
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// Random draws per dimension.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write props_summary.json.
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::UnknownModel(_)
        | Error::BadParam(_)
        | Error::BadFloor(_)
        | Error::BadGrid(_)
        | Error::BadSanitizePolicy(_)
        | Error::TooFewTrajectories { .. } => EXIT_CONFIG,
        Error::StepAbort { .. } | Error::ExcessNegativity { .. } => EXIT_ABORT,
        _ => 1,
    }
}

fn run_command(
    config_path: &std::path::Path,
    trajectories: Option<usize>,
    seed: Option<u64>,
    output: Option<PathBuf>,
) -> Result<u8, Error> {
    let mut config = RunConfig::from_path(config_path)?;
    if let Some(n) = trajectories {
        config.trajectories = n;
    }
    if let Some(s) = seed {
        config.base_seed = s;
    }
    if let Some(dir) = output {
        config.output_dir = dir;
    }
    if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
        config.output_dir = PathBuf::from(dir);
    }

    let summary = cli::run(&config)?;
    println!(
        "model={} trajectories={} steps={} dt={}",
        summary.config.model_name, summary.config.trajectories, summary.steps, summary.config.dt
    );
    match (summary.min_margin_sigmas, summary.min_margin_time) {
        (Some(margin), Some(time)) => {
            println!("min margin_sigmas = {margin:.4} at t = {time:.4}");
        }
        _ => println!("no verdicts (fewer than 2 trajectories or window does not fit)"),
    }
    println!(
        "violations = {}, floored fraction = {:.4}, max pre-sanitize negativity = {:.3e}",
        summary.violation_count, summary.floored_fraction, summary.max_pre_sanitize_negativity
    );
    println!(
        "outputs in {} ({:.2} s)",
        summary.config.output_dir.display(),
        summary.wall_time_seconds
    );
    Ok(if summary.violated() {
        EXIT_VIOLATION
    } else {
        0
    })
}

fn props_command(dims: &[usize], samples: usize, seed: u64, output: PathBuf) -> Result<u8, Error> {
    let output = match std::env::var(ENV_OUTPUT_DIR) {
        Ok(dir) => PathBuf::from(dir),
        Err(_) => output,
    };
    let summary = cli::run_property_suite(dims, samples, seed, &output)?;
    let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "ito identity residual: max = {:.3e} (tol {:.1e}) {}",
        summary.max_ito_residual,
        summary.ito_residual_tol,
        flag(summary.max_ito_residual <= summary.ito_residual_tol)
    );
    println!(
        "abe term slack: min = {:.3e} (tol {:.1e}) {}",
        summary.min_abe_slack,
        summary.abe_slack_tol,
        flag(summary.min_abe_slack >= summary.abe_slack_tol)
    );
    println!(
        "commuting reduction gap: max = {:.3e} (tol {:.1e}) {}",
        summary.max_commuting_gap,
        summary.commuting_gap_tol,
        flag(summary.max_commuting_gap <= summary.commuting_gap_tol)
    );
    println!(
        "props_summary.json in {} ({:.2} s)",
        output.display(),
        summary.wall_time_seconds
    );
    Ok(if summary.passed { 0 } else { EXIT_PROPS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Cmd::Run {
            config,
            trajectories,
            seed,
            output,
        } => run_command(config, *trajectories, *seed, output.clone()),
        Cmd::Props {
            dims,
            samples,
            seed,
            output,
        } => props_command(dims, *samples, *seed, output.clone()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
