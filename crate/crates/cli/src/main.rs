use clap::Parser;

fn main() {
    let cli = doublewell_cli::Cli::parse();
    if let Err(e) = doublewell_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
