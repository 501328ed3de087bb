use clap::Parser;

fn main() {
    let cli = aoi_cli::Cli::parse();
    std::process::exit(aoi_cli::run(&cli));
}
