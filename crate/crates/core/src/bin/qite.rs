use clap::Parser;
use qite_core::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
