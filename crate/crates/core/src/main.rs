use clap::Parser;
use sqm_smatrix::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
