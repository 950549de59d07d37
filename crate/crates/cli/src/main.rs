mod args;
mod commands;
mod error;
mod manifest;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Invocation};
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    match cli.command {
        Command::Simulate(r) => commands::run(Invocation::Simulate(r.args), &r.out),
        Command::Deconvolve(r) => commands::run(Invocation::Deconvolve(r.args), &r.out),
        Command::Score(r) => commands::run(Invocation::Score(r.args), &r.out),
        Command::Eval(r) => commands::run(Invocation::Eval(r.args), &r.out),
        Command::Replay(a) => commands::replay(&a),
    }
}
