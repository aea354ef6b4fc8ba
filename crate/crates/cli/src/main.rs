use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mg_cli::{config, describe, run_to_dir};

#[derive(Parser)]
#[command(name = "mg", version, about = "Minority-game experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config ("-" reads stdin).
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => config::load(&config).and_then(|cfg| {
            let (dir, manifest) = run_to_dir(&cfg, out.as_deref())?;
            println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
            Ok(())
        }),
        Command::Validate { config } => config::load(&config).map(|cfg| println!("ok: {}", describe(&cfg))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
