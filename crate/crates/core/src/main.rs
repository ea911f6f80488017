use std::process::ExitCode;

use clap::Parser;
use soft_snake::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
