use clap::Parser;

fn main() {
    let cli = chaoslab_cli::Cli::parse();
    std::process::exit(chaoslab_cli::run(cli));
}
