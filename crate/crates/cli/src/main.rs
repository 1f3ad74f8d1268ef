use clap::Parser;

fn main() {
    let cli = ecgtrend_cli::Cli::parse();
    std::process::exit(ecgtrend_cli::run(cli));
}
