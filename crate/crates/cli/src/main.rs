//! `cpfsim`: batch reproduction runs of the photon-photon gate simulator.

use std::process::ExitCode;

use clap::Parser;
use cpf_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cpfsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
