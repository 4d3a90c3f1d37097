use clap::Parser;

fn main() {
    let cli = ctaoi::cli::Cli::parse();
    if let Err(e) = ctaoi::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
