use std::process::ExitCode;

use clap::Parser;
use flowlab_cli::args::Cli;
use flowlab_cli::{run, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::load(
        cli.command.experiment(),
        cli.config.as_deref(),
        cli.overrides(),
    )
    .and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            println!(
                "wrote {} files to {} (config_hash={}, workers={})",
                outcome.files.len(),
                outcome.dir.display(),
                outcome.hash,
                outcome.workers
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
