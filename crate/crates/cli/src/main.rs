use std::process::ExitCode;

use clap::Parser;

use microgrid_fl_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("error: caused by: {cause}");
            }
            ExitCode::FAILURE
        }
    }
}
