use clap::Parser;

use softedge_cli::config::THREADS_ENV;
use softedge_cli::{configure_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = configure_threads(std::env::var(THREADS_ENV).ok()).and_then(|_| run(&cli.command));
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
