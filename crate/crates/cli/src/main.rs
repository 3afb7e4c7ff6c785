use std::process::ExitCode;

use clap::Parser;
use panel_mbb_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panel_mbb_cli::execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
