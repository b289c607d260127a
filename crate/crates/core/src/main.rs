use clap::Parser;

fn main() {
    let cli = telegate::cli::Cli::parse();
    std::process::exit(telegate::cli::run(cli));
}
