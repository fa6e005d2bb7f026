use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gqfn::cli::{self, CliError, CliResult};

#[derive(Parser)]
#[command(name = "gqfn", version, about = "Compose and simulate quantum feedback networks driven by Gaussian fields")]
struct Args {
    /// Validation tolerance for S unitarity, H self-adjointness and noise validity.
    #[arg(long, global = true, default_value_t = cli::DEFAULT_TOL)]
    tol: f64,
    /// Print how the pipeline is composed to stderr.
    #[arg(long, global = true)]
    print_order: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec file and report every problem found.
    Validate { spec: PathBuf },
    /// Write the composite (S, L, H) as a re-ingestible spec file.
    Compose {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run an evolve or steady experiment and write CSV.
    Evolve {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the amplifier k-sweep and write the convergence CSV.
    DpaLimit {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn run(args: &Args) -> CliResult<()> {
    cli::configure_threads(std::env::var(cli::THREADS_ENV).ok().as_deref())?;
    if !(args.tol >= 0.0) {
        return Err(CliError::Runtime(format!("--tol must be nonnegative, got {}", args.tol)));
    }
    let (spec, output) = match &args.command {
        Command::Validate { spec } => (spec, None),
        Command::Compose { spec, output } | Command::Evolve { spec, output } | Command::DpaLimit { spec, output } => {
            (spec, output.as_deref())
        }
    };
    if args.print_order {
        let file = cli::load(spec)?;
        eprint!("{}", cli::order_description(&file.pipeline));
    }
    let result = match &args.command {
        Command::Validate { .. } => cli::cmd_validate(spec, args.tol),
        Command::Compose { .. } => cli::cmd_compose(spec, args.tol),
        Command::Evolve { .. } => cli::cmd_evolve(spec, args.tol),
        Command::DpaLimit { .. } => cli::cmd_dpa_limit(spec, args.tol),
    };
    match result {
        Ok(text) => emit(&text, output),
        Err(CliError::Failed { output: text, message }) => {
            emit(&text, output)?;
            Err(CliError::Failed { output: String::new(), message })
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
