use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ndae_ident::cli::{self, CliError, Phase};

#[derive(Parser)]
#[command(name = "ndae-ident", version, about = "Simulate, identify and certify index-1 DAE models")]
struct Args {
    /// JSON run configuration; defaults apply to every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory, overriding `out_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the model, simulate training trajectories and sample the dataset.
    Generate,
    /// Fit the algebraic map or the differential network.
    Train {
        #[arg(long, value_enum)]
        phase: PhaseArg,
    },
    /// Compare the identified model with the truth on a held-out trajectory.
    Evaluate,
    /// Estimate the error bound constants and write the certificate.
    Certify,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Algebraic,
    Dynamic,
}

fn run(args: &Args) -> Result<String, CliError> {
    let cfg = cli::load_config(args.config.as_deref(), args.out.as_deref())?;
    Ok(match args.command {
        Command::Generate => cli::generate(&cfg)?.to_string(),
        Command::Train { phase } => {
            let phase = match phase {
                PhaseArg::Algebraic => Phase::Algebraic,
                PhaseArg::Dynamic => Phase::Dynamic,
            };
            cli::train(&cfg, phase)?.to_string()
        }
        Command::Evaluate => cli::evaluate(&cfg)?.to_string(),
        Command::Certify => cli::certify_run(&cfg)?.to_string(),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
