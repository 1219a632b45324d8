use clap::Parser;

fn main() {
    env_logger::init();
    let cli = steklov::cli::Cli::parse();
    let outcome = steklov::cli::run(&cli);
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    std::process::exit(steklov::cli::exit_code(&outcome));
}
