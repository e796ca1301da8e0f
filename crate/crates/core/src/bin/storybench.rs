//! Binary entry point.

use clap::Parser;

fn main() {
    let cli = storybench::cli::Cli::parse();
    std::process::exit(storybench::cli::run(cli));
}
