mod args;
mod commands;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::Cli;

/// Parses `argv`, runs the subcommand and maps the outcome to an exit code:
/// 0 success, 1 processing failure, 2 usage error.
fn run(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let parsed = Cli::command()
        .try_get_matches_from(argv)
        .and_then(|m| Cli::from_arg_matches(&m).map(|cli| (cli, m)));
    let (cli, matches) = match parsed {
        Ok(p) => p,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.into()).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: threads: {e}");
            return 1;
        }
    };
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    match pool.install(|| commands::dispatch(&cli.command, sub)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
