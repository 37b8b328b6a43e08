use clap::Parser;
use wiener_radon_cli::{configure_threads, run, Cli, THREADS_ENV};

fn main() {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads(std::env::var(THREADS_ENV).ok().as_deref()) {
        eprintln!("error: {msg}");
        std::process::exit(2);
    }
    std::process::exit(run(&cli));
}
