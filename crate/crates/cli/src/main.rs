use std::process::ExitCode;

use clap::Parser;
use csdf_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(&Cli::parse())
}
