use clap::Parser;

fn main() {
    let cli = anosov_lab::Cli::parse();
    std::process::exit(anosov_lab::run(&cli));
}
