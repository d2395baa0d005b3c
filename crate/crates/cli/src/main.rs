use std::process::ExitCode;
use std::sync::atomic::AtomicBool;

use clap::Parser;
use pal_cli::commands::{install_interrupt, run, Cli};

static STOP: AtomicBool = AtomicBool::new(false);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    install_interrupt(&STOP);
    match run(cli, &STOP) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
