use std::process::ExitCode;

use clap::Parser;

use ac_lab::cli::{exit_code, init_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(&cli));
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("ac-lab {}: {err}", cli.command.name());
            ExitCode::from(exit_code(&err))
        }
    }
}
