use clap::Parser;

fn main() {
    let cli = bayes_limits::cli::Cli::parse();
    std::process::exit(bayes_limits::cli::main_with(cli));
}
