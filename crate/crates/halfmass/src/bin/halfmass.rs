use clap::Parser;

fn main() {
    halfmass::cli::configure_threads();
    let cli = halfmass::cli::Cli::parse();
    std::process::exit(halfmass::cli::run(cli));
}
