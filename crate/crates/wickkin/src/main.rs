use clap::Parser;

fn main() {
    std::process::exit(wickkin::cli::main_with(wickkin::cli::Cli::parse()));
}
