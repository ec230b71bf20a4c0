use clap::Parser;

use pinchflow::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
