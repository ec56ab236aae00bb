use clap::Parser;

fn main() {
    std::process::exit(eelab::cli::main_with(eelab::cli::Cli::parse()));
}
