use clap::Parser;
use provox::cli::{run, Cli};

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("PROVOX_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    if let Err(e) = run(cli) {
        eprintln!("error: {}: {}", e.code, e.message);
        std::process::exit(1);
    }
}
