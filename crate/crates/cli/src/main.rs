use clap::Parser;

fn main() {
    let cli = affobs_cli::app::Cli::parse();
    std::process::exit(affobs_cli::app::run(&cli));
}
