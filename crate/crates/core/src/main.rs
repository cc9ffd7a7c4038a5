use std::process::ExitCode;

use clap::Parser;
use critsys::cli::{error_json, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e, Some(cli.command.name())));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
