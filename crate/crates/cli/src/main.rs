use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sigen_cli::config::{Command, RunConfig};
use sigen_cli::runner::{execute, write_outputs, EXIT_INVALID};
use sigen_cli::parse_config;

#[derive(Parser)]
#[command(name = "sigen", version, about = "Shape-invariant potentials: factorization, gen-next extension and checks")]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run a command against a configuration file.
    #[command(flatten)]
    Run(RunAction),
    /// Print the built-in default configuration for a family.
    Defaults {
        #[arg(long, default_value = "harmonic_oscillator")]
        family: String,
    },
}

#[derive(Subcommand)]
enum RunAction {
    /// List the families in the catalog.
    Catalog(Args),
    /// Sample W, V+ and V- and check base shape invariance.
    Factorize(Args),
    /// Lowest levels of V+ and V- and their pairing.
    Spectrum(Args),
    /// Grow the stage-n tree of extended partners.
    Extend(Args),
    /// Solve the deformation constraint and compare it with the extension.
    Deform(Args),
    /// Run the built-in battery of residual checks.
    Verify(Args),
    /// Locate singularities of every node in the tree.
    Scan(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunAction {
    fn split(self) -> (Command, Args) {
        match self {
            RunAction::Catalog(a) => (Command::Catalog, a),
            RunAction::Factorize(a) => (Command::Factorize, a),
            RunAction::Spectrum(a) => (Command::Spectrum, a),
            RunAction::Extend(a) => (Command::Extend, a),
            RunAction::Deform(a) => (Command::Deform, a),
            RunAction::Verify(a) => (Command::Verify, a),
            RunAction::Scan(a) => (Command::Scan, a),
        }
    }
}

fn load(command: Command, args: &Args) -> Result<RunConfig, String> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None if command == Command::Catalog => RunConfig::minimal("harmonic_oscillator"),
        None => return Err(format!("`{command}` needs --config <file>")),
    };
    if let Some(c) = config.command {
        if c != command {
            return Err(format!("configuration is for `{c}` but `{command}` was requested"));
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let action = match cli.action {
        Action::Defaults { family } => {
            if let Err(e) = sigen_core::catalog::lookup_family(&family) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_INVALID as u8);
            }
            print!("{}", RunConfig::minimal(&family).to_toml());
            return ExitCode::SUCCESS;
        }
        Action::Run(a) => a,
    };
    let (command, args) = action.split();
    let config = match load(command, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    let exec = execute(&config, command);
    let dir = args.output.unwrap_or_else(|| config.output_dir.clone());
    if let Err(e) = write_outputs(&exec, &dir) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_INVALID as u8);
    }
    if let Some(err) = &exec.report.error {
        eprintln!("error: {err}");
    }
    for c in exec.report.checks.iter().filter(|c| !c.passed) {
        eprintln!("check {} failed: {:e} > {:e}", c.name, c.value, c.tolerance);
    }
    for f in &exec.report.failures {
        eprintln!("branch {} failed: {}", f.path, f.error);
    }
    println!("{}: exit {} ({} table(s) in {})", command, exec.exit_code(), exec.tables.len(), dir.display());
    ExitCode::from(exec.exit_code() as u8)
}
