mod cli;
mod commands;
mod output;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use crate::cli::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version go to stdout and succeed; everything else is a
            // usage error.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(output::exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.help_json {
        let mut cmd = Cli::command();
        cmd.build();
        let text = rgk_core::io::to_canonical_string(&output::command_json(&cmd))?;
        return output::emit(None, text.as_bytes());
    }
    match cli.command {
        Some(command) => commands::dispatch(command),
        None => {
            Cli::command().print_help()?;
            Err(output::usage("no command given"))
        }
    }
}
